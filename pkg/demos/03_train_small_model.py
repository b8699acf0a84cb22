"""Train a compact network on synthetic sessions and save it.

Run:  python demos/03_train_small_model.py
Takes roughly half a minute on a desktop CPU.
"""

import tempfile
from pathlib import Path

from consgrunet import data as D
from consgrunet import model as M
from consgrunet import runtime as R
from consgrunet.model import ConvBlockConfig, ModelConfig

workdir = Path(tempfile.mkdtemp(prefix="consgrunet_demo_"))
D.make_synthetic(workdir, num_classes=6, channels=4, window_len=20,
                 windows_per_class=60, noise_sd=0.1, seed=2)
windows = D.load_windows(workdir, window_len=20, stride=20)
split = D.split_windows(windows, D.RandomSplit(0.8, 0.1, 0.1), seed=2)
print(f"{len(windows)} windows -> train {len(split.train)}, "
      f"val {len(split.val)}, test {len(split.test)}")

config = ModelConfig(
    input_channels=4,
    window_len=20,
    conv_blocks=(ConvBlockConfig(16, 5, 1, 2), ConvBlockConfig(32, 3, 1, 1)),
    gru_hidden=32,
    dense_hidden=32,
    num_classes=6,
    seed=3,
)
state = M.build_model(config)
total, _ = M.count_params(state)
print(f"model: {total} parameters")

mu, sigma = D.fit_normalizer([windows[i] for i in split.train])
state.set_normalization(mu, sigma)

best, logs = R.train(state, windows, split,
                     R.TrainConfig(epochs=12, batch_size=32, lr=3e-3, seed=4))
for log in logs:
    print(f"epoch {log.epoch:2d}  train_loss={log.train_loss:.4f} "
          f"train_acc={log.train_acc:.3f}  val_loss={log.val_loss:.4f} "
          f"val_acc={log.val_acc:.3f}  ({log.seconds:.2f}s)")

test_windows = [windows[i] for i in split.test]
report = R.evaluate(best, test_windows)
print(f"test accuracy={report.accuracy:.4f} kappa={report.kappa:.4f} "
      f"macro_mcc={report.macro_mcc:.4f}")

model_path = workdir / "small.csgn"
M.save_model(best, model_path)
R.write_train_log(logs, workdir / "train_log.csv")
print("saved", model_path, f"({model_path.stat().st_size} bytes)")
reloaded = M.load_model(model_path)
print("reload check, parameter count:", M.count_params(reloaded)[0])
