"""Run the reference sweep through the CLI and print the fitted rates.

    python3 scripts/reference_sweep.py [output_dir]
"""
import json
import pathlib
import sys

from mfpd import cli

ROOT = pathlib.Path(__file__).resolve().parents[1]


def main():
    out = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT / "runs" / "reference"
    code = cli.main(["sweep", str(ROOT / "configs" / "reference.json"), "--output", str(out)])
    if code not in (cli.EXIT_OK, cli.EXIT_PARTIAL):
        return code
    fits = json.loads((out / "report.json").read_text())["fits"]
    print(f"\n{'quantity':<24}{'against':<10}{'slope':>10}{'R2':>10}")
    for name, f in sorted(fits.items()):
        if "error" in f:
            print(f"{name:<24}{f['against']:<10}  {f['error']}")
        else:
            print(f"{name:<24}{f['against']:<10}{f['slope']:>10.3f}{f['r2']:>10.3f}")
    return code


if __name__ == "__main__":
    sys.exit(main())
