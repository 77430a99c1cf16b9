#!/usr/bin/env python3
"""Regenerates the checked-in MNIST fixture: a 1,000-image IDX test subset and
a 4-bit quantized model for the 5-layer network.

The images come from the 5,000-sample MNIST subset shipped inside the mlxtend
wheel (no network access to the original archive is needed). 4,000 images
train the model, the remaining 1,000 become the fixture test set.

Training uses the k-bit uniform quantizer with a straight-through estimator
and an L1 penalty that keeps the worst-case integer magnitude of every layer
below t/2 for t = 5522259017729, so the exported model passes the scale
tracker's no-overflow certificate.

usage: make_mnist_fixture.py [--wheel PATH] [--out DIR] [--seed N]
"""

import argparse
import glob
import gzip
import io
import json
import os
import struct
import subprocess
import tempfile
import zipfile

import numpy as np
import torch
import torch.nn.functional as F

T_PLAIN = 5522259017729
BITS = 4
LEVELS = (1 << BITS) - 1
INPUT_SCALE = 4
WEIGHT_SCALE = 15


def load_subset(wheel):
    if wheel is None:
        tmp = tempfile.mkdtemp()
        subprocess.check_call(["pip", "download", "mlxtend==0.24.0", "--no-deps", "-d", tmp, "-q"])
        wheel = glob.glob(os.path.join(tmp, "mlxtend-*.whl"))[0]
    z = zipfile.ZipFile(wheel)
    raw = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz"))
    data = np.loadtxt(io.BytesIO(raw), delimiter=",")
    return data[:, :-1].astype(np.uint8), data[:, -1].astype(np.uint8)


def write_idx(path, images, labels):
    with open(path + "-images.idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        f.write(images.astype(np.uint8).tobytes())
    with open(path + "-labels.idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def quantize(w):
    # w_q = round(w * (2^k - 1)) / (2^k - 1), identity gradient
    wc = w.clamp(-1.0, 1.0)
    wq = torch.round(wc * LEVELS) / LEVELS
    return wc + (wq - wc).detach()


class Net(torch.nn.Module):
    def __init__(self):
        super().__init__()
        self.c1 = torch.nn.Parameter(torch.randn(5, 1, 5, 5) * 0.15)
        self.c2 = torch.nn.Parameter(torch.randn(50, 1, 5, 5) * 0.15)
        self.fc = torch.nn.Parameter(torch.randn(10, 800) * 0.05)
        # logit temperature; a positive rescaling that the integer model does not need
        self.log_temp = torch.nn.Parameter(torch.tensor(-4.0))
        self.log_s1 = torch.nn.Parameter(torch.tensor(-3.7))
        self.log_s2 = torch.nn.Parameter(torch.tensor(-3.7))

    def integer_weights(self):
        return [torch.round(quantize(p) * WEIGHT_SCALE) for p in (self.c1, self.c2, self.fc)]

    def forward(self, x):
        # x holds integerized pixels in [0, 4]; every layer is homogeneous, so
        # the positive rescalings below do not change the integer argmax.
        w1, w2, w3 = [q * WEIGHT_SCALE for q in (quantize(self.c1), quantize(self.c2), quantize(self.fc))]
        h = F.conv2d(x, w1, stride=2)
        h = (h * self.log_s1.exp()) ** 2
        h = F.conv2d(h, w2, stride=2, groups=5)
        h = (h * self.log_s2.exp()) ** 2
        h = h.permute(0, 2, 3, 1).reshape(x.shape[0], -1)  # (h, w, c) flatten order
        return F.linear(h, w3) * self.log_temp.exp()

    def log2_bound(self):
        """Differentiable worst-case magnitude of the integer network (log2)."""
        w1, w2, w3 = self.integer_float_weights()
        pos1 = w1.clamp(min=0).sum((1, 2, 3)) * INPUT_SCALE
        neg1 = (-w1).clamp(min=0).sum((1, 2, 3)) * INPUT_SCALE
        m1 = torch.maximum(pos1, neg1) ** 2                      # square output in [0, m1]
        m1g = m1.repeat_interleave(10)                           # input channel of each grouped filter
        pos2 = w2.clamp(min=0).sum((1, 2, 3)) * m1g
        neg2 = (-w2).clamp(min=0).sum((1, 2, 3)) * m1g
        m2 = torch.maximum(pos2, neg2) ** 2
        m2f = m2.repeat(16)                                      # (h, w, c) flatten: channel = i % 50
        pos3 = (w3.clamp(min=0) * m2f).sum(1)
        neg3 = ((-w3).clamp(min=0) * m2f).sum(1)
        return torch.log2(torch.maximum(pos3, neg3).max() + 1.0)

    def integer_float_weights(self):
        return [quantize(p) * WEIGHT_SCALE for p in (self.c1, self.c2, self.fc)]


def worst_case_bound(w1, w2, w3):
    """Per-channel interval propagation, mirrors the C++ scale tracker."""
    w1 = w1.astype(object); w2 = w2.astype(object); w3 = w3.astype(object)
    lo = [0]; hi = [INPUT_SCALE]
    peak = INPUT_SCALE

    def conv(lo, hi, w, groups):
        nlo, nhi = [], []
        per_group = w.shape[0] // groups
        depth = w.shape[1]
        for o in range(w.shape[0]):
            base = (o // per_group) * depth
            a = b = 0
            for d in range(depth):
                for v in w[o, d].flat:
                    c = base + d
                    x, y = v * lo[c], v * hi[c]
                    a += min(x, y); b += max(x, y)
            nlo.append(a); nhi.append(b)
        return nlo, nhi

    def square(lo, hi):
        nlo, nhi = [], []
        for a, b in zip(lo, hi):
            m = max(a * a, b * b)
            nlo.append(0 if a <= 0 <= b else min(a * a, b * b)); nhi.append(m)
        return nlo, nhi

    lo, hi = conv(lo, hi, w1, 1); peak = max(peak, *map(abs, lo), *map(abs, hi))
    lo, hi = square(lo, hi); peak = max(peak, *hi)
    lo, hi = conv(lo, hi, w2, 5); peak = max(peak, *map(abs, lo), *map(abs, hi))
    lo, hi = square(lo, hi); peak = max(peak, *hi)
    # fc over (h, w, c): channel of input index i is i % 50
    flo, fhi = [], []
    for o in range(w3.shape[0]):
        a = b = 0
        for i, v in enumerate(w3[o]):
            x, y = v * lo[i % 50], v * hi[i % 50]
            a += min(x, y); b += max(x, y)
        flo.append(a); fhi.append(b)
    peak = max(peak, *map(abs, flo), *map(abs, fhi))
    return peak


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--wheel")
    ap.add_argument("--out", default=os.path.dirname(os.path.abspath(__file__)))
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--epochs", type=int, default=50)
    ap.add_argument("--l1", type=float, default=0.0)
    ap.add_argument("--bound-weight", type=float, default=0.5)
    ap.add_argument("--target-log2", type=float, default=40.6)
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    torch.manual_seed(args.seed)
    images, labels = load_subset(args.wheel)
    perm = np.random.RandomState(args.seed).permutation(len(images))
    images, labels = images[perm], labels[perm]
    train_x, train_y = images[:4000], labels[:4000]
    test_x, test_y = images[4000:], labels[4000:]
    write_idx(os.path.join(args.out, "mnist_subset_test"), test_x, test_y)

    def prep(x):
        return torch.tensor(np.round(x.astype(np.float64) / 255.0 * INPUT_SCALE), dtype=torch.float32).reshape(-1, 1, 28, 28)

    xtr, ytr = prep(train_x), torch.tensor(train_y, dtype=torch.long)
    xte, yte = prep(test_x), torch.tensor(test_y, dtype=torch.long)

    net = Net()
    opt = torch.optim.Adam(net.parameters(), lr=3e-3)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, args.epochs)
    for epoch in range(args.epochs):
        idx = torch.randperm(len(xtr))
        for s in range(0, len(xtr), 64):
            b = idx[s:s + 64]
            loss = F.cross_entropy(net(xtr[b]), ytr[b])
            loss = loss + args.l1 * sum(p.abs().sum() for p in (net.c1, net.c2, net.fc))
            ramp = min(1.0, epoch / (0.5 * args.epochs))
            loss = loss + ramp * args.bound_weight * F.relu(net.log2_bound() - args.target_log2)
            opt.zero_grad(); loss.backward(); opt.step()
        sched.step()
        with torch.no_grad():
            acc = (net(xte).argmax(1) == yte).float().mean().item()
            lb = net.log2_bound().item()
        print(f"epoch {epoch}: loss {loss.item():.4f} test acc {acc:.4f} log2 bound {lb:.2f}")

    with torch.no_grad():
        w1, w2, w3 = [w.numpy().astype(np.int64) for w in net.integer_weights()]
    peak = worst_case_bound(w1, w2, w3)
    print(f"worst-case bound: {peak} (~2^{np.log2(float(peak)):.2f}), t/2 = {T_PLAIN // 2}")
    print("nonzero weights:", int((w1 != 0).sum()), int((w2 != 0).sum()), int((w3 != 0).sum()))

    # exact integer accuracy on the fixture test set
    x = np.round(test_x.astype(np.float64) / 255.0 * INPUT_SCALE).astype(np.int64).reshape(-1, 1, 28, 28)
    with torch.no_grad():
        h = F.conv2d(torch.tensor(x, dtype=torch.float64), torch.tensor(w1, dtype=torch.float64), stride=2) ** 2
        h = F.conv2d(h, torch.tensor(w2, dtype=torch.float64), stride=2, groups=5) ** 2
        h = h.permute(0, 2, 3, 1).reshape(len(x), -1)
        logits = F.linear(h, torch.tensor(w3, dtype=torch.float64))
        int_acc = (logits.argmax(1).numpy() == test_y).mean()
    print(f"integer model accuracy on fixture test set: {int_acc:.4f}")

    model = {
        "format": "hefir-model",
        "version": 1,
        "architecture": "mnist",
        "bit_width": BITS,
        "input": {"height": 28, "width": 28, "channels": 1, "scale": INPUT_SCALE},
        "layers": [
            {"kind": "conv", "filters": 5, "kernel": [5, 5], "stride": [2, 2], "padding": False, "groups": 1,
             "weight_scale": WEIGHT_SCALE,
             "weights": w1.transpose(0, 2, 3, 1).reshape(-1).tolist()},
            {"kind": "square"},
            {"kind": "conv", "filters": 50, "kernel": [5, 5], "stride": [2, 2], "padding": False, "groups": 5,
             "weight_scale": WEIGHT_SCALE,
             "weights": w2.transpose(0, 2, 3, 1).reshape(-1).tolist()},
            {"kind": "square"},
            {"kind": "fc", "outputs": 10, "weight_scale": WEIGHT_SCALE, "weights": w3.reshape(-1).tolist()},
        ],
    }
    with open(os.path.join(args.out, "mnist_4bit_model.json"), "w") as f:
        json.dump(model, f, separators=(",", ":"))
        f.write("\n")


if __name__ == "__main__":
    main()
