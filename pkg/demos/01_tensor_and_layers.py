"""Tensor primitives and layer kernels, checked against hand arithmetic.

Run:  python demos/01_tensor_and_layers.py
"""

import numpy as np

from consgrunet.tensor import Tensor, ew, identity, matmul, reduce
from consgrunet import layers

print("== tensor primitives ==")
a = Tensor([[1.0, 2.0], [3.0, 4.0]])
print("identity @ a == a:", np.array_equal(matmul(identity(2), a).array, a.array))
print("sigmoid(0) =", ew("sigmoid", Tensor([0.0])).tolist()[0])
print("row means of [[1,3],[5,7]]:", reduce("mean", Tensor([[1.0, 3.0], [5.0, 7.0]]), 1).tolist())

print()
print("== 1D convolution ==")
conv = layers.Conv1dParams(Tensor([[[1.0, 1.0]]]), Tensor([0.0]))
y, cache = layers.conv1d_forward(conv, Tensor([[1.0, 2.0, 3.0, 4.0]]))
print("kernel [1,1] over [1,2,3,4] ->", y.tolist()[0], "(pairwise sums)")
gx, gw, gb = layers.conv1d_backward(cache, Tensor([[1.0, 1.0, 1.0]]))
print("grad wrt weights:", gw.tolist(), " grad wrt bias:", gb.tolist())

print()
print("== gated skip connection ==")
# gate logit 0 means the gate is half open: y = main + 0.5 * skip
skip = layers.GatedSkipParams(Tensor([0.0]))
y, _ = layers.gated_skip_apply(skip, Tensor([[1.0, 1.0]]), Tensor([[2.0, 4.0]]))
print("main [1,1] + half-open gate on skip [2,4] ->", y.tolist()[0])
closed = layers.GatedSkipParams(Tensor([-20.0]))
y, _ = layers.gated_skip_apply(closed, Tensor([[1.0, 1.0]]), Tensor([[2.0, 4.0]]))
print("gate logit -20 (closed):", y.tolist()[0], "~= main path only")

print()
print("== GRU single step, all weights 0.5 ==")
t = lambda v: Tensor(np.full((1, 1), v, dtype=np.float32))
b = lambda v: Tensor(np.array([v], dtype=np.float32))
gru = layers.GruParams(W_z=t(0.5), W_r=t(0.5), W_h=t(0.5), U_z=t(0.5), U_r=t(0.5),
                       U_h=t(0.5), b_z=b(0.0), b_r=b(0.0), b_h=b(0.0))
h_seq, _ = layers.gru_forward(gru, Tensor([[1.0]]), Tensor([0.0]))
print("h_1 =", float(h_seq.array[0, 0]), "(sigmoid(0.5) * tanh(0.5) = 0.2877...)")

print()
print("== gradient vs central finite differences ==")
rng = np.random.default_rng(0)
w = rng.uniform(-1, 1, (2, 3, 3))
bias = rng.uniform(-1, 1, 2)
x = rng.uniform(-1, 1, (3, 8))
proj = rng.uniform(-1, 1, (2, 8))
_, cache = layers.conv1d_forward_arrays(w, bias, x, 1, 1)
_, gw, _ = layers.conv1d_backward_arrays(cache, proj)
h = 1e-3
fd = np.zeros_like(w)
for idx in np.ndindex(w.shape):
    w[idx] += h
    up, _ = layers.conv1d_forward_arrays(w, bias, x, 1, 1)
    w[idx] -= 2 * h
    dn, _ = layers.conv1d_forward_arrays(w, bias, x, 1, 1)
    w[idx] += h
    fd[idx] = ((up - dn) * proj).sum() / (2 * h)
print("max |analytic - numeric| over conv weights:", float(np.max(np.abs(gw - fd))))
