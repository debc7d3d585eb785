"""Mean utility, AoS and energy of every scheme as the inference accuracy chi varies."""
from _common import parser, print_table, run


def main():
    p = parser(__doc__, "runs/chi_sweep")
    p.add_argument("--chi", type=float, nargs="+", default=[0.3, 0.5, 0.8])
    args = p.parse_args()
    _, rows, _ = run(args, chi_list=tuple(args.chi))
    for field in ("mean_u", "mean_c", "mean_energy"):
        print_table(rows, field, ("scheme", "chi"))


if __name__ == "__main__":
    main()
