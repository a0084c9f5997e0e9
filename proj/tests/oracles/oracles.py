"""Independent reference values for the unit tests.

Each function recomputes a frozen constant with numpy only. Run this file to
print them; the C++ tests hold the printed values.
"""

import numpy as np


def rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def box_mask(R, T, pc, w, l):
    c = R @ pc + T
    return (c[0] - w / 2, c[1] - l / 2), (c[0] + w / 2, c[1] + l / 2), c[1]


def softplus(z, beta=10.0):
    return np.where(beta * z > 30, z, np.log1p(np.exp(np.minimum(beta * z, 30))) / beta)


def tiny_decoder(x):
    # 3 -> 2 -> 1, weights listed row-major per layer.
    W1 = np.array([[0.5, -0.25, 0.125], [-0.75, 0.2, 0.3]])
    b1 = np.array([0.1, -0.05])
    W2 = np.array([[1.5, -0.8]])
    b2 = np.array([0.02])
    return (W2 @ softplus(W1 @ x + b1) + b2)[0]


def nearest(a, b):
    return np.array([min(np.linalg.norm(p - q) for q in b) for p in a])


def horn_align(src, dst):
    # Horn (1987) closed-form unit-quaternion registration.
    mu_s, mu_d = src.mean(0), dst.mean(0)
    S = (src - mu_s).T @ (dst - mu_d)
    Sxx, Sxy, Sxz = S[0]
    Syx, Syy, Syz = S[1]
    Szx, Szy, Szz = S[2]
    N = np.array([
        [Sxx + Syy + Szz, Syz - Szy, Szx - Sxz, Sxy - Syx],
        [Syz - Szy, Sxx - Syy - Szz, Sxy + Syx, Szx + Sxz],
        [Szx - Sxz, Sxy + Syx, -Sxx + Syy - Szz, Syz + Szy],
        [Sxy - Syx, Szx + Sxz, Syz + Szy, -Sxx - Syy + Szz],
    ])
    vals, vecs = np.linalg.eigh(N)
    q0, qx, qy, qz = vecs[:, np.argmax(vals)]
    R = np.array([
        [q0**2 + qx**2 - qy**2 - qz**2, 2 * (qx * qy - q0 * qz), 2 * (qx * qz + q0 * qy)],
        [2 * (qy * qx + q0 * qz), q0**2 - qx**2 + qy**2 - qz**2, 2 * (qy * qz - q0 * qx)],
        [2 * (qz * qx - q0 * qy), 2 * (qz * qy + q0 * qx), q0**2 - qx**2 - qy**2 + qz**2],
    ])
    return R, mu_d - R @ mu_s


def main():
    pl, pr, cy = box_mask(rot_z(np.pi / 2), np.zeros(3), np.array([1.0, 0, 0]), 2, 2)
    print("mask rot90", pl, pr, cy)
    pl, pr, cy = box_mask(rot_z(0.3), np.array([1.0, 2.0, 3.0]), np.array([4.0, -1.0, 0.5]), 1.5, 3.0)
    print("mask yaw0.3 p_l=(%.17g, %.17g) p_r=(%.17g, %.17g) cy=%.17g" % (*pl, *pr, cy))

    local = np.array([0.25, 0.5, 0.75])
    w = [np.prod([local[a] if (v >> a) & 1 else 1 - local[a] for a in range(3)]) for v in range(8)]
    print("trilinear weights (0.25,0.5,0.75)", ["%.17g" % x for x in w])

    print("tiny decoder (0.3,-0.2,0.7) %.17g" % tiny_decoder(np.array([0.3, -0.2, 0.7])))
    print("tiny decoder (-1,2,0.5) %.17g" % tiny_decoder(np.array([-1.0, 2.0, 0.5])))

    pred = np.array([[0.0, 0, 0], [3.0, 0, 0]])
    gt = np.array([[0.0, 0, 0], [1.0, 0, 0]])
    acc, comp = nearest(pred, gt).mean(), nearest(gt, pred).mean()
    print("chamfer pair acc %.17g comp %.17g c-l1 %.17g" % (acc, comp, (acc + comp) / 2))

    p, r = 0.9, 1.0
    print("f-score P=0.9 R=1 %.17g" % (200 * p * r / (p + r)))

    i = np.arange(10.0)
    gt_t = np.stack([i, 0.1 * i**2, 0.05 * i], 1)
    est_t = gt_t.copy()
    est_t[4, 0] += 0.3
    R, t = horn_align(est_t, gt_t)
    res = (est_t @ R.T + t) - gt_t
    print("ate one offset %.17g" % np.sqrt((res**2).sum(1).mean()))

    # Population variance of {1,2,3} and mean ground height of {0.1,0.2,0.3}.
    print("variance %.17g" % np.var([1.0, 2.0, 3.0]))
    print("mean height %.17g" % np.mean([0.1, 0.2, 0.3]))


if __name__ == "__main__":
    main()
