"""Learning curves of offline DAC and CQL trained on expert and random data.

Prints the seed-averaged evaluation utility at each checkpoint and the first
iteration at which offline DAC on expert data stays within 5% of its final value.
"""
import numpy as np

from _common import parser, print_table, run

SCHEMES = ("offline_dac_expert", "offline_dac_random", "cql_expert", "cql_random")


def main():
    args = parser(__doc__, "runs/convergence").parse_args()
    _, rows, curves = run(args, schemes=SCHEMES)
    print_table(rows, "mean_u", ("scheme",))
    for scheme in SCHEMES:
        sel = [c for c in curves if c["scheme"] == scheme]
        iters = sorted({int(c["iter"]) for c in sel})
        mean = np.array([np.mean([float(c["mean_u"]) for c in sel if int(c["iter"]) == it])
                         for it in iters])
        final = mean[-3:].mean()
        inside = np.abs(mean - final) <= 0.05 * final
        settled = next((it for i, it in enumerate(iters) if inside[i:].all()), None)
        print(f"\n{scheme}: final {final:.4f}, within 5% from iteration {settled}")
        for it, m in zip(iters, mean):
            print(f"  {it:>6} {m:.4f}")


if __name__ == "__main__":
    main()
