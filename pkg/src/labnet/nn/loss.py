"""Training objective: softmax cross-entropy + coefficient-sum penalty + L2.

The coefficient-sum penalty is ``lambda_sum * mean_a |sum_i lam_ai|`` over
every distinct LAB block a. L2 decay covers every non-RBF parameter; its
gradient is added by the optimizer (see ``optim.Adam.step``), so
``backward_pass`` returns gradients of the first two terms only.
"""
import numpy as np


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy and its gradient with respect to ``logits``."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    n = len(labels)
    logp = z[np.arange(n), labels] - np.log(e.sum(axis=1))
    loss = -float(np.mean(logp, dtype=np.float64))
    d = p
    d[np.arange(n), labels] -= 1.0
    return loss, d / n


def block_sums(model):
    """Per-block coefficient sums, concatenated over all distinct LAB blocks."""
    sums = [model.params[n].astype(np.float64).sum(axis=1) for n in model.lambda_names()]
    return np.concatenate(sums) if sums else np.zeros(0)


def mean_abs_lambda_sum(model):
    s = block_sums(model)
    return float(np.abs(s).mean()) if s.size else 0.0


def lambda_sum_penalty(model, lambda_sum):
    """Penalty value and its (sub)gradient; sign(0) is taken as 0."""
    names = model.lambda_names()
    grads = {}
    A = model.n_blocks()
    if not names or A == 0:
        return 0.0, grads
    total = 0.0
    for n in names:
        lam = model.params[n]
        s = lam.astype(np.float64).sum(axis=1)
        total += float(np.abs(s).sum())
        g = (lambda_sum / A) * np.sign(s)
        grads[n] = np.broadcast_to(g[:, None], lam.shape).astype(lam.dtype)
    return lambda_sum * total / A, grads


def l2_penalty(model, weight_decay):
    if not weight_decay:
        return 0.0
    mask = model.decay_mask()
    sq = sum(float(np.sum(p.astype(np.float64) ** 2)) for n, p in model.params.items() if mask[n])
    return 0.5 * weight_decay * sq


def loss(logits, labels, model, lambda_sum=0.0, weight_decay=0.0):
    ce, _ = softmax_cross_entropy(logits, labels)
    reg, _ = lambda_sum_penalty(model, lambda_sum)
    return ce + reg + l2_penalty(model, weight_decay)


def forward_pass(model, batch, train=True):
    return model.forward(batch, train=train)


def backward_pass(model, logits, caches, labels, lambda_sum=0.0):
    """Gradients of cross-entropy + coefficient-sum penalty. Returns (loss, grads)."""
    ce, dlogits = softmax_cross_entropy(logits, labels)
    grads = model.backward(dlogits.astype(logits.dtype), caches)
    reg, rgrads = lambda_sum_penalty(model, lambda_sum)
    for n, g in rgrads.items():
        grads[n] = grads[n] + g
    return ce + reg, grads
