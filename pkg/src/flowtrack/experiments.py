"""Shared synthetic regimes for the scripts and the acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass

from .metrics import MotReport, mot_report
from .pipeline import TrainConfig, track, track_rows, train_costs
from .synth import ScenarioConfig, generate_scenario

# crowded scene, weak appearance cue, informative actions, double-detection clutter
NOISY_REGIME = dict(
    n_identities=10,
    n_frames=150,
    image_w=640.0,
    image_h=480.0,
    speed_std=3.0,
    appearance_dim=16,
    appearance_noise_std=0.6,
    paf_noise_std=0.15,
    segment_len=(60, 150),
    miss_prob=0.15,
    fp_rate=2.0,
    fp_near_prob=0.5,
    bbox_jitter_std=3.0,
    true_score_beta=(6.0, 3.0),
    false_score_beta=(4.0, 4.0),
)
TRAIN_SEED_OFFSET = 1000
ABLATION_MAX_GAP = 10


@dataclass
class AblationResult:
    seed: int
    with_paf: MotReport
    ablated: MotReport

    @property
    def fewer_id_switches(self) -> bool:
        return self.with_paf.id_switches < self.ablated.id_switches

    @property
    def higher_precision(self) -> bool:
        return self.with_paf.precision > self.ablated.precision

    @property
    def recall_delta(self) -> float:
        return self.with_paf.recall - self.ablated.recall


def paf_ablation(seed: int, regime: dict | None = None, max_gap: int = ABLATION_MAX_GAP) -> AblationResult:
    """Track one test scenario with and without the PAF cue.

    Both pipelines train on the same separate scenario; the ablated one sees
    ``c_paf`` fixed at 1 during training, so its ensemble never splits on it.
    """
    regime = dict(NOISY_REGIME if regime is None else regime)
    train = generate_scenario(ScenarioConfig(seed=TRAIN_SEED_OFFSET + seed, **regime))
    test = generate_scenario(ScenarioConfig(seed=seed, **regime))
    reports = []
    for paf_constant in (None, 1.0):
        costs = train_costs(train.gt_rows(), train.detections, TrainConfig(max_gap=max_gap, paf_constant=paf_constant))
        trajs = track(test.detections, costs, max_gap=max_gap)
        reports.append(mot_report(test.gt_rows(), track_rows(test.detections, trajs)))
    return AblationResult(seed, *reports)
