"""Show where plain-SGD training of a unit-variance GBRBM on TF-IDF rows starts to diverge.

    python3 scripts/lr_stability.py --lr 0.001 0.005 0.01 0.05 --hidden 200
"""

import argparse
from dataclasses import replace

from crimeseries import gbrbm
from crimeseries.config import PipelineConfig
from crimeseries.errors import TrainingDivergedError

from hidden_size_sweep import features


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lr", type=float, nargs="+", default=[0.001, 0.005, 0.01, 0.05])
    ap.add_argument("--hidden", type=int, default=200)
    ap.add_argument("--epochs", type=int, default=30)
    args = ap.parse_args()

    cfg = PipelineConfig().seeded()
    data, _ = features(cfg)
    for lr in args.lr:
        train_cfg = replace(cfg.train, learning_rate=lr, epochs=args.epochs)
        trace = []
        try:
            gbrbm.train(data, args.hidden, train_cfg, epoch_callback=lambda e, m, loss: trace.append(loss))
            status = f"final loss {trace[-1]:.4g}"
            if trace[-1] > 1e3 * trace[0]:
                status += " (exploding)"
        except TrainingDivergedError as exc:
            status = f"diverged ({exc})"
        head = " ".join(f"{x:.3g}" for x in trace[:5])
        print(f"lr={lr:<8g} {status}; first epochs: {head}")


if __name__ == "__main__":
    main()
