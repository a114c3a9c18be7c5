"""Training loop for the convolutional models."""
import math
from dataclasses import dataclass

import numpy as np

from . import data as D
from .errors import LabnetError
from .kernels import KernelSpec
from .nn import loss as L
from .nn.model import build_model
from .nn.optim import Adam, StepSchedule

DIVERGENCE_LOSS = 1e4
DIVERGENCE_STEPS = 50


class Diverged(LabnetError):
    def __init__(self, message, epoch, step):
        super().__init__(message)
        self.epoch, self.step = epoch, step


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_acc: float
    lr: float
    mean_abs_lambda_sum: float

    CSV_HEADER = "epoch,train_loss,train_acc,val_acc,lr,mean_abs_lambda_sum"

    def csv_row(self):
        return (f"{self.epoch},{self.train_loss:.6f},{self.train_acc:.6f},{self.val_acc:.6f},"
                f"{self.lr:.6g},{self.mean_abs_lambda_sum:.6e}")


def make_model(config, dtype=np.float32):
    c = config
    kw = {}
    if c.activation == "lab":
        kw = dict(sharing=c.sharing, kernel=KernelSpec.parse(c.kernel, c.degree), s=c.s,
                  init=c.init, r=c.r, clip=c.clip)
    return build_model(c.model, c.dataset, c.activation, dtype=dtype, **kw)


class Trainer:
    """Owns a model, its optimizer and the data for one run."""

    def __init__(self, config, train_set, test_set, dtype=np.float32):
        self.config = config
        if config.train_subset:
            train_set = train_set.subset(config.train_subset)
        self.train_set, self.test_set = train_set, test_set
        self.normalizer = D.Normalizer.fit(train_set.images)
        self.model = make_model(config, dtype).init(config.seed)
        self.adam = Adam()
        self.schedule = StepSchedule.parse(config.lr, config.schedule or "")
        self.epoch = 0
        self._bad_steps = 0
        self._test_x = self.normalizer(test_set.images)

    def train_epoch(self, epoch, on_step=None):
        c, model = self.config, self.model
        lr = self.schedule(epoch)
        decay = model.decay_mask()
        imgs, labels = self.train_set.images, self.train_set.labels
        n = len(labels)
        if c.augment:
            offsets, flips = D.augment_params(n, c.seed, epoch, c.flip)
        tot_loss, correct = 0.0, 0
        for step, idx in enumerate(D.batches(n, c.batch, c.seed, epoch)):
            if c.augment:
                x = self.normalizer(D.crop_flip(imgs[idx], offsets[idx], flips[idx]))
            else:
                x = self.normalizer(imgs[idx])
            y = labels[idx]
            # overflow is caught by _check, not reported as warnings
            with np.errstate(over="ignore", invalid="ignore"):
                logits, caches = model.forward(x, train=True)
                obj, grads = L.backward_pass(model, logits, caches, y, c.lambda_sum)
                obj += L.l2_penalty(model, c.weight_decay)
                self._check(obj, epoch, step)
                self.adam.step(model.params, grads, lr, c.weight_decay, decay)
            tot_loss += obj * len(idx)
            correct += int((logits.argmax(1) == y).sum())
            if on_step is not None:
                on_step(self, epoch, step, obj)
        val = self.evaluate()
        self.epoch = epoch + 1
        return EpochRecord(epoch + 1, tot_loss / n, correct / n, val, lr, L.mean_abs_lambda_sum(model))

    def _check(self, obj, epoch, step):
        if not math.isfinite(obj):
            raise Diverged(f"non-finite loss at epoch {epoch + 1}, step {step}", epoch, step)
        self._bad_steps = self._bad_steps + 1 if obj > DIVERGENCE_LOSS else 0
        if self._bad_steps >= DIVERGENCE_STEPS:
            raise Diverged(f"loss above {DIVERGENCE_LOSS:g} for {DIVERGENCE_STEPS} steps", epoch, step)

    def evaluate(self, images=None, labels=None):
        """Accuracy in eval mode (running batch-norm statistics)."""
        if images is None:
            x, labels = self._test_x, self.test_set.labels
        else:
            x = self.normalizer(images)
        pred = self.model.predict(x).argmax(1)
        return float((pred == labels).mean())

    def init_record(self):
        """Epoch-0 record: metrics of the untrained model on un-augmented training data."""
        x = self.normalizer(self.train_set.images)
        logits = self.model.predict(x)
        ce, _ = L.softmax_cross_entropy(logits.astype(np.float64), self.train_set.labels)
        obj = ce + L.lambda_sum_penalty(self.model, self.config.lambda_sum)[0] + \
            L.l2_penalty(self.model, self.config.weight_decay)
        acc = float((logits.argmax(1) == self.train_set.labels).mean())
        return EpochRecord(0, obj, acc, self.evaluate(), self.schedule(0), L.mean_abs_lambda_sum(self.model))

    def fit(self, on_epoch=None, on_step=None):
        records = []
        for epoch in range(self.epoch, self.config.epochs):
            rec = self.train_epoch(epoch, on_step)
            records.append(rec)
            if on_epoch is not None:
                on_epoch(self, rec)
        return records
