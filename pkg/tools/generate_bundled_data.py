"""Regenerate the deterministic CSVs bundled under src/recourse/data_files/."""

from pathlib import Path

from recourse.data import (
    lsat_schema,
    pima_schema,
    synthesize_lsat,
    synthesize_pima,
    write_csv,
)

OUT = Path(__file__).resolve().parent.parent / "src" / "recourse" / "data_files"


def main():
    X, y = synthesize_lsat(seed=0)
    write_csv(OUT / "lsat.csv", lsat_schema(), X, y, decimals=[2, 1, 0], y_decimals=3)
    print(f"wrote {OUT / 'lsat.csv'} ({X.shape[0]} rows)")

    X, y = synthesize_pima(seed=0)
    write_csv(OUT / "pima.csv", pima_schema(), X, y,
              decimals=[0, 1, 1, 1, 1, 1, 3, 0], y_decimals=0)
    print(f"wrote {OUT / 'pima.csv'} ({X.shape[0]} rows)")


if __name__ == "__main__":
    main()
