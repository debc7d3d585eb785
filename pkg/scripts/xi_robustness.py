"""Offline DAC and CQL trained on expert/random mixtures, against A2C.

Prints mean utility per expert fraction xi and paired one-sided comparisons of
offline DAC at each xi against CQL at every xi and against A2C.
"""
from _common import parser, print_table, run
from aosrl.stats import paired_diff


def per_seed(rows, scheme, xi=None):
    sel = sorted((r for r in rows if r["scheme"] == scheme
                  and (xi is None or float(r["xi"]) == xi)), key=lambda r: int(r["seed"]))
    return [float(r["mean_u"]) for r in sel]


def main():
    p = parser(__doc__, "runs/xi_robustness")
    p.add_argument("--xi", type=float, nargs="+", default=[0.05, 0.25, 0.5, 0.75])
    args = p.parse_args()
    _, rows, _ = run(args, schemes=("a2c", "offline_dac_mix", "cql_mix"), xi_list=tuple(args.xi))
    print_table(rows, "mean_u", ("scheme", "xi"))
    print("\npaired differences (offline DAC minus other), one-sided 5% test")
    for xi in args.xi:
        dac = per_seed(rows, "offline_dac_mix", xi)
        others = [("a2c", per_seed(rows, "a2c"))]
        others += [(f"cql xi={x}", per_seed(rows, "cql_mix", x)) for x in args.xi]
        for name, other in others:
            d = paired_diff(dac, other)
            verdict = ("better" if d.significantly_positive() else
                       "worse" if d.significantly_negative() else "no significant difference")
            print(f"  dac xi={xi} vs {name:<14} {d.mean:+.4f} (t {d.t:+.2f}) {verdict}")


if __name__ == "__main__":
    main()
