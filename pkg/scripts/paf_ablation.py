"""Track noisy synthetic scenarios with and without the PAF cue.

    python3 scripts/paf_ablation.py [--seeds 10] [--max-gap 10]
"""

import argparse

from flowtrack.experiments import ABLATION_MAX_GAP, paf_ablation


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--max-gap", type=int, default=ABLATION_MAX_GAP)
    args = ap.parse_args()

    print(f"{'seed':>4} | {'IDs paf':>7} {'IDs abl':>7} | {'prec paf':>8} {'prec abl':>8} | {'d recall':>8} | win")
    wins = 0
    for seed in range(args.seeds):
        r = paf_ablation(seed, max_gap=args.max_gap)
        win = r.fewer_id_switches and r.higher_precision and abs(r.recall_delta) < 2.0
        wins += win
        print(f"{seed:>4} | {r.with_paf.id_switches:>7} {r.ablated.id_switches:>7} | "
              f"{r.with_paf.precision:>8.2f} {r.ablated.precision:>8.2f} | {r.recall_delta:>+8.2f} | {'yes' if win else 'no'}")
    print(f"PAF cue wins on {wins}/{args.seeds} seeds")


if __name__ == "__main__":
    main()
