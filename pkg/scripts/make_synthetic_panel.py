"""Write a synthetic panel (observed CSV, truth CSV, schema) for trying the CLI.

    python scripts/make_synthetic_panel.py --kind reference --seed 7 --out data/reference
"""
import argparse
from pathlib import Path

from panelmi.ingest import Schema, write_schema, write_wide_csv
from panelmi.synth import reference_panel, screening_panel


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--kind", choices=["reference", "screening"], default="reference")
    ap.add_argument("--seed", type=int, required=True)
    ap.add_argument("--out", required=True)
    args = ap.parse_args()
    panel = reference_panel(args.seed) if args.kind == "reference" else screening_panel(args.seed).panel
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_wide_csv(panel.observed, out / "observed.csv")
    write_wide_csv(panel.truth, out / "truth.csv")
    write_schema(Schema.from_dataset(panel.observed), out / "schema.ini")
    print(f"wrote {out}/observed.csv, truth.csv, schema.ini "
          f"({panel.observed.n_rows} rows, {len(panel.observed.codes)} variables)")


if __name__ == "__main__":
    main()
