"""Fixture Script - Writes a synthetic evaluation dataset"""
import argparse
import logging
import sys
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from app.services.synthetic import build_synthetic_dataset


def main():
    parser = argparse.ArgumentParser(description="Write truth/ and pred/ folders of synthetic scenes")
    parser.add_argument("out_dir")
    parser.add_argument("--images", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--perfect", action="store_true", help="Predictions equal the annotations")
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')

    print("=" * 60)
    print("SYNTHETIC FIXTURES")
    print("=" * 60)
    ids = build_synthetic_dataset(args.out_dir, n_images=args.images, seed=args.seed, perfect=args.perfect)
    print(f"\n{len(ids)} images written to {args.out_dir}")
    print(f"Evaluate with: python -m app eval {args.out_dir}/pred {args.out_dir}/truth --out {args.out_dir}/results")


if __name__ == "__main__":
    main()
