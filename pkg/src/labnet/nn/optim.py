"""Adam with coupled L2 decay and step learning-rate schedules."""
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Adam:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params, grads, lr, weight_decay=0.0, decay_mask=None):
        """Update ``params`` in place.

        Where ``decay_mask[name]`` is true, ``weight_decay * param`` is added to
        the gradient before the moment updates.
        """
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for name, p in params.items():
            g = grads[name]
            if weight_decay and (decay_mask is None or decay_mask.get(name, True)):
                g = g + weight_decay * p
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m, v = self.m[name], self.v[name]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * (g * g)
            step = (lr / c1) * m / (np.sqrt(v / c2) + self.eps)
            p -= step.astype(p.dtype, copy=False)


def adam_step(params, grads, state, lr, weight_decay=0.0, decay_mask=None):
    state.step(params, grads, lr, weight_decay, decay_mask)
    return params, state


@dataclass(frozen=True)
class StepSchedule:
    """Piecewise-constant learning rate: ``base`` until the first drop, then each drop's rate.

    ``drops`` is a sequence of (epoch, rate) with epochs counted from 0.
    """

    base: float
    drops: tuple = ()

    def __call__(self, epoch):
        lr = self.base
        for e, rate in self.drops:
            if epoch >= e:
                lr = rate
        return lr

    def describe(self):
        return ";".join(f"{e}:{r:g}" for e, r in self.drops)

    @classmethod
    def parse(cls, base, text):
        drops = []
        for part in filter(None, (t.strip() for t in text.split(";"))):
            e, r = part.split(":")
            drops.append((int(e), float(r)))
        return cls(base, tuple(drops))


def lenet_schedule(base=1e-3, epochs=30):
    """Divide by 10 at 2/3 and 5/6 of training (epochs 20 and 25 of 30)."""
    e1, e2 = round(epochs * 20 / 30), round(epochs * 25 / 30)
    return StepSchedule(base, ((e1, base / 10), (e2, base / 100)))


def resnet_schedule(base=1e-3, epochs=200):
    """Drops to 1e-3, 3e-4, 1e-4, 1e-5 at epochs 100/130/150/175 of 200, scaled to ``epochs``."""
    pts = ((100, 1e-3), (130, 3e-4), (150, 1e-4), (175, 1e-5))
    return StepSchedule(base, tuple((round(e * epochs / 200), r) for e, r in pts))
