"""Independent reference computations whose outputs are frozen in the C++ tests.

Run with: python3 tests/oracles/reference_trace.py
"""
import math

import numpy as np
from scipy import stats

M32 = 0xFFFFFFFF


def philox(ctr, key):
    ctr = list(ctr)
    key = list(key)
    for r in range(10):
        if r:
            key[0] = (key[0] + 0x9E3779B9) & M32
            key[1] = (key[1] + 0xBB67AE85) & M32
        p0 = 0xD2511F53 * ctr[0]
        p1 = 0xCD9E8D57 * ctr[2]
        ctr = [((p1 >> 32) ^ ctr[1] ^ key[0]) & M32, p1 & M32,
               ((p0 >> 32) ^ ctr[3] ^ key[1]) & M32, p0 & M32]
    return ctr


class Stream:
    def __init__(self, seed, stream):
        self.key = [seed & M32, (seed >> 32) & M32]
        self.stream = stream
        self.counter = 0
        self.buf = []
        self.spare = None

    def u64(self):
        if not self.buf:
            c = self.counter
            self.buf = philox([c & M32, (c >> 32) & M32, self.stream & M32,
                               (self.stream >> 32) & M32], self.key)
            self.counter += 1
        lo, hi = self.buf[0], self.buf[1]
        self.buf = self.buf[2:]
        return (hi << 32) | lo

    def uniform(self):
        return ((self.u64() >> 11) + 0.5) * 2.0 ** -53

    def normal(self):
        if self.spare is not None:
            s, self.spare = self.spare, None
            return s
        r = math.sqrt(-2.0 * math.log(self.uniform()))
        a = 2.0 * math.pi * self.uniform()
        self.spare = r * math.sin(a)
        return r * math.cos(a)


def stream_id(query, proto, step):
    return (query << 24) | (proto << 4) | step


def softmax2(x, base=2.0):
    top = max(x)
    e = [math.exp((v - top) * math.log(base)) for v in x]
    s = sum(e)
    return [v / s for v in e]


def clipped_mean(st, mean, var, n):
    sd = math.sqrt(var)
    acc = 0.0
    for _ in range(n):
        acc += min(max(mean + sd * st.normal(), 0.0), 1.0)
    return acc / n


def cos(a, b):
    return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))


X = [[1, 0, 0], [0.9, 0.1, 0], [0, 1, 0], [0.1, 0.9, 0.2], [0, 0, 1], [0.2, 0.1, 0.9]]
D = [[0.7, 0.2, 0.1], [0.5, 0.3, 0.2], [0.2, 0.6, 0.2], [0.1, 0.8, 0.1], [0.1, 0.2, 0.7],
     [0.3, 0.3, 0.4]]
Q = [0.6, 0.5, 0.2]
SEED, QID = 42, 7


def trace():
    protos = [[i for i, d in enumerate(D) if int(np.argmax(d)) == p] for p in range(3)]
    hits = []
    for members in protos:
        best = max(members, key=lambda i: (cos(Q, X[i]), -i))
        hits.append((best, cos(Q, X[best])))
    sims = [s for _, s in hits]
    mu = softmax2(sims)
    w = []
    for i in range(3):
        s = clipped_mean(Stream(SEED, stream_id(QID, i, 1)), mu[i], 0.5, 100)
        c = clipped_mean(Stream(SEED, stream_id(QID, i, 2)), 0.05 * mu[i], 0.5, 100)
        w.append(s + c)
    acc = [sum(w[i] * D[hits[i][0]][j] for i in range(3)) for j in range(3)]
    out = softmax2(acc)

    ww = softmax2(sims)
    acc_w = [sum(ww[i] * D[hits[i][0]][j] for i in range(3)) for j in range(3)]
    return hits, mu, w, out, ww, softmax2(acc_w)


def main():
    print("philox(0,0) =", [f"{v:08x}" for v in philox([0] * 4, [0, 0])])
    print("philox(ff..) =", [f"{v:08x}" for v in philox([M32] * 4, [M32, M32])])
    print("philox(pi)   =", [f"{v:08x}" for v in philox(
        [0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344], [0xA4093822, 0x299F31D0])])
    st = Stream(7, 3)
    print("stream(7,3) u64 x3 =", [st.u64() for _ in range(3)])
    hits, mu, w, out, ww, wout = trace()
    print("hits", hits)
    print("mu", [repr(v) for v in mu])
    print("w", [repr(v) for v in w])
    print("uaknn", [repr(v) for v in out])
    print("wuaknn weights", [repr(v) for v in ww])
    print("wuaknn", [repr(v) for v in wout])
    sd = math.sqrt(0.5)
    analytic = sd * (stats.norm.pdf(0) - stats.norm.pdf(1 / sd)) + stats.norm.sf(1 / sd)
    print("clipped mean at 0, var 0.5:", repr(analytic))
    print("ttest a", repr(stats.ttest_rel([0.9, 0.8, 0.85, 0.95, 0.9],
                                          [0.7, 0.75, 0.72, 0.8, 0.78]).pvalue))
    print("ttest b", repr(stats.ttest_rel([1, 2, 3, 4.5], [1.1, 1.9, 3.2, 4.4]).pvalue))


if __name__ == "__main__":
    main()
