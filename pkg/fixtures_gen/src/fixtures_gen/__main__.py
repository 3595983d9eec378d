import argparse

from .generate import generate_all


def main() -> int:
    p = argparse.ArgumentParser(
        prog="fixtures_gen",
        description="Train the precision-profile fixtures and export "
                    "QONNX files, IDX subsets, and golden predictions",
    )
    p.add_argument("--out", required=True)
    p.add_argument("--mnist-dir", default=None,
                   help="directory with the four MNIST IDX files; falls "
                        "back to the synthetic digit set when absent")
    p.add_argument("--train-count", type=int, default=12000)
    p.add_argument("--test-count", type=int, default=2000)
    p.add_argument("--float-epochs", type=int, default=3)
    p.add_argument("--qat-epochs", type=int, default=2)
    p.add_argument("--filters", type=int, default=64)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--quick", action="store_true",
                   help="tiny run for smoke testing")
    args = p.parse_args()
    kwargs = dict(
        mnist_dir=args.mnist_dir, train_count=args.train_count,
        test_count=args.test_count, float_epochs=args.float_epochs,
        qat_epochs=args.qat_epochs, filters=args.filters, seed=args.seed,
    )
    if args.quick:
        kwargs.update(train_count=1500, test_count=300, float_epochs=1,
                      qat_epochs=1, filters=8)
    manifest = generate_all(args.out, **kwargs)
    for stem, info in manifest["fixtures"].items():
        print(f"{stem}: {info['graph']} accuracy {info['accuracy_pct']}% "
              f"(subset {info['subset_accuracy_pct']}%)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
