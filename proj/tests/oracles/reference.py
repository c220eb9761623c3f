#!/usr/bin/env python3
"""Independent reference values for the C++ tests.

Every quantity here is computed with numpy / scipy / scikit-image / colorsys,
without touching the C++ code. The results are written to
tests/support/reference_values.hpp and checked into the repository; rerun
this script only when a test input changes.

Inputs are either the bundled PNG fixtures or the deterministic `wave`
pattern that tests/support/oracles.hpp reproduces in C++.
"""

import colorsys
import math
import pathlib

import numpy as np
from scipy import ndimage, signal, special
from skimage import io
from skimage.metrics import peak_signal_noise_ratio, structural_similarity

HERE = pathlib.Path(__file__).resolve().parent
FIXTURES = HERE.parent / "fixtures"
OUT = HERE.parent / "support" / "reference_values.hpp"


def wave(shape, phase):
    n = np.arange(int(np.prod(shape)), dtype=np.float64)
    return (np.sin(0.731 * n + phase) + 0.5 * np.cos(0.0131 * n * n + 2.0 * phase)).reshape(shape)


def unit_wave(shape, phase):
    return 0.5 + 0.3 * wave(shape, phase)


def checksum(a):
    """Weighted sum that changes with any single entry."""
    return float(np.sum(a * wave(a.shape, 0.5)))


def load_gray(name):
    img = io.imread(FIXTURES / name).astype(np.float64) / 255.0
    if img.ndim == 3:
        img = 0.299 * img[..., 0] + 0.587 * img[..., 1] + 0.114 * img[..., 2]
    else:
        img = 0.299 * img + 0.587 * img + 0.114 * img
    return img


# ---------------------------------------------------------------- tensor ops

def conv2d_same(x, k):
    cout, cin, kh, _ = k.shape
    out = np.zeros((cout,) + x.shape[1:])
    for o in range(cout):
        for i in range(cin):
            out[o] += signal.correlate2d(x[i], k[o, i], mode="same", boundary="fill")
    return out


def instance_norm(t, eps=1e-5):
    out = np.zeros_like(t)
    for c in range(t.shape[0]):
        ch = t[c]
        if np.all(ch == ch.flat[0]):
            continue
        out[c] = (ch - ch.mean()) / np.sqrt(ch.var() + eps)
    return out


def sigmoid(x):
    return special.expit(x)


VIEWS = [(1, 0, 2), (2, 0, 1), (0, 1, 2)]


def tce(f, branches, eps=1e-5):
    acc = np.zeros_like(f)
    for axes, (kernel, gain, bias) in zip(VIEWS, branches):
        view = np.transpose(f, axes)
        pooled = np.stack([view.max(axis=0), view.mean(axis=0)])
        att = sigmoid(gain * instance_norm(conv2d_same(pooled, kernel), eps) + bias)
        acc += np.transpose(view * att, np.argsort(axes))
    return f + acc / 3.0


def tce_branches(k, phase):
    return [(wave((1, 2, k, k), phase + y), 1.0 + 0.1 * y, 0.05 * y) for y in range(3)]


# ---------------------------------------------------------------- caa

def second_moment(f):
    flat = f.reshape(-1, f.shape[-1])
    return flat.T @ flat / flat.shape[0]


def build_mask(cov, ratio):
    c = cov.shape[0]
    entries = [(i, j) for i in range(c) for j in range(i + 1, c)]
    count = max(1, math.ceil(round(ratio * len(entries), 9)))
    entries.sort(key=lambda e: -cov[e])  # python sort is stable
    mask = np.zeros_like(cov)
    for e in entries[:count]:
        mask[e] = 1.0
    return mask


def fuse(f, mask, strength):
    c = f.shape[-1]
    s = (mask.sum(axis=0) + mask.sum(axis=1)) / (c - 1)
    gate = 1.0 - strength * np.minimum(1.0, s)
    return 0.5 * (f + gate * f)


def caa_forward(f_i, f_hv, layers, ratio, strength, k):
    reports = []
    for x in range(layers):
        n_i = np.transpose(instance_norm(np.transpose(f_i, (2, 0, 1))), (1, 2, 0))
        n_hv = np.transpose(instance_norm(np.transpose(f_hv, (2, 0, 1))), (1, 2, 0))
        d_i, d_hv = second_moment(n_i), second_moment(n_hv)
        cov = 0.25 * (d_i - d_hv) ** 2
        mask = build_mask(cov, ratio)
        g_i, g_hv = fuse(n_i, mask, strength), fuse(n_hv, mask, strength)
        f_i = np.transpose(tce(np.transpose(g_i, (2, 0, 1)), tce_branches(k, 10.0 * x + 1.0)), (1, 2, 0))
        f_hv = np.transpose(tce(np.transpose(g_hv, (2, 0, 1)), tce_branches(k, 10.0 * x + 5.0)), (1, 2, 0))
        reports.append((d_i, d_hv, mask))
    vcf = sum(np.abs(d_i * m).sum() + np.abs(d_hv * m).sum() for d_i, d_hv, m in reports) / layers
    return f_i, f_hv, vcf


# ---------------------------------------------------------------- colorspace

def rgb_to_hvi(rgb, k=1.0, eps=1e-8):
    h = np.zeros(rgb.shape[1:])
    s = np.zeros(rgb.shape[1:])
    v = np.zeros(rgb.shape[1:])
    for idx in np.ndindex(*rgb.shape[1:]):
        h[idx], s[idx], v[idx] = colorsys.rgb_to_hsv(*rgb[(slice(None),) + idx])
    ck = k * np.sqrt(np.sin(np.pi * v / 2.0) + eps)
    return np.stack([ck * s * np.cos(2 * np.pi * h), ck * s * np.sin(2 * np.pi * h), v])


# ---------------------------------------------------------------- losses

def cda(fp, fg, tau):
    lp = special.log_softmax(fp.reshape(fp.shape[0], -1) / tau, axis=1)
    lq = special.log_softmax(fg.reshape(fg.shape[0], -1) / tau, axis=1)
    return float(np.sum(np.exp(lp) * (lp - lq)))


# ---------------------------------------------------------------- nss

def mscn_maps(gray):
    img = gray * 255.0
    sigma = 7.0 / 6.0
    truncate = 3.0 / sigma
    mu = ndimage.gaussian_filter(img, sigma, mode="nearest", truncate=truncate)
    sq = ndimage.gaussian_filter(img * img, sigma, mode="nearest", truncate=truncate)
    sd = np.sqrt(np.abs(sq - mu * mu))
    centered = img - mu
    centered[np.abs(centered) < 1e-9] = 0.0
    return centered / (sd + 1.0), sd


GAMMAS = 0.2 + 1e-3 * np.arange(9801)
RATIOS = np.exp(2 * special.gammaln(2 / GAMMAS) - special.gammaln(1 / GAMMAS) - special.gammaln(3 / GAMMAS))


def aggd(x):
    x = x.ravel()
    left, right = x[x < 0], x[x > 0]
    sl, sr = np.sqrt(np.mean(left ** 2)), np.sqrt(np.mean(right ** 2))
    g = sl / sr
    rhat = np.mean(np.abs(x)) ** 2 / np.mean(x ** 2)
    big_r = rhat * (g ** 3 + 1) * (g + 1) / (g ** 2 + 1) ** 2
    gamma = GAMMAS[np.argmin(np.abs(RATIOS - big_r))]
    f = np.exp(0.5 * (special.gammaln(1 / gamma) - special.gammaln(3 / gamma)))
    eta = (sr * f - sl * f) * np.exp(special.gammaln(2 / gamma) - special.gammaln(1 / gamma))
    return gamma, sl, sr, eta


def scale_features(c):
    g, sl, sr, _ = aggd(c)
    feats = [g, 0.5 * (sl ** 2 + sr ** 2)]
    pairs = [
        c[:, :-1] * c[:, 1:],
        c[:-1, :] * c[1:, :],
        c[:-1, :-1] * c[1:, 1:],
        c[:-1, 1:] * c[1:, :-1],
    ]
    for p in pairs:
        g, sl, sr, eta = aggd(p)
        feats += [g, eta, sl ** 2, sr ** 2]
    return feats


def down2(img):
    h, w = img.shape[0] // 2 * 2, img.shape[1] // 2 * 2
    img = img[:h, :w]
    return 0.25 * (img[0::2, 0::2] + img[0::2, 1::2] + img[1::2, 0::2] + img[1::2, 1::2])


def brisque(gray):
    return scale_features(mscn_maps(gray)[0]) + scale_features(mscn_maps(down2(gray))[0])


def niqe_patches(gray, p=96, thr=0.75):
    full, sd = mscn_maps(gray)
    half = mscn_maps(down2(gray))[0]
    feats, sharp = [], []
    for r in range(gray.shape[0] // p):
        for c in range(gray.shape[1] // p):
            y, x = r * p, c * p
            f1 = scale_features(full[y:y + p, x:x + p])
            f2 = scale_features(half[y // 2:y // 2 + p // 2, x // 2:x // 2 + p // 2])
            feats.append(f1 + f2)
            sharp.append(sd[y:y + p, x:x + p].mean())
    peak = max(sharp)
    return np.array([f for f, s in zip(feats, sharp) if s > thr * peak or s == peak])


def niqe_fit(images):
    rows = np.concatenate([niqe_patches(im) for im in images])
    return rows.mean(axis=0), np.cov(rows, rowvar=False)


def niqe(gray, mu, sigma):
    rows = niqe_patches(gray)
    f = rows.mean(axis=0)
    s = np.cov(rows, rowvar=False)
    pooled = 0.5 * (s + sigma)
    w, v = np.linalg.eigh(0.5 * (pooled + pooled.T))
    tol = np.abs(w).max() * 1e-12 * len(w)
    inv = np.where(np.abs(w) > tol, 1.0 / np.where(w == 0, 1, w), 0.0)
    pinv = (v * inv) @ v.T
    d = f - mu
    return float(np.sqrt(max(0.0, d @ pinv @ d)))


# ---------------------------------------------------------------- emit

def main():
    vals = {}
    arrays = {}

    x = wave((3, 6, 5), 0.1)
    kern = wave((2, 3, 3, 3), 0.2)
    vals["kConv2dChecksum"] = checksum(conv2d_same(x, kern))

    f = wave((4, 5, 6), 0.3)
    vals["kTceChecksum"] = checksum(tce(f, tce_branches(3, 0.7)))

    fi = wave((5, 6, 4), 0.4)
    fhv = wave((5, 6, 4), 0.9)
    out_i, out_hv, vcf = caa_forward(fi, fhv, layers=2, ratio=1 / 3, strength=1.0, k=3)
    vals["kCaaChecksumI"] = checksum(out_i)
    vals["kCaaChecksumHv"] = checksum(out_hv)
    vals["kCaaVcfLoss"] = float(vcf)

    vals["kCdaWave"] = cda(wave((4, 3, 3), 1.1), wave((4, 3, 3), 1.6), 0.7)

    rgb = unit_wave((3, 7, 9), 2.0)
    hvi = rgb_to_hvi(rgb)
    vals["kHviChecksum"] = checksum(hvi)
    rgb_gt = unit_wave((3, 7, 9), 2.5)
    hvi_gt = rgb_to_hvi(rgb_gt)
    vals["kRecLossWave"] = float(np.mean(np.abs(rgb - rgb_gt)) + 0.8 * np.mean(np.abs(hvi - hvi_gt)))

    cam = load_gray("natural_camera.png")
    crop = cam[100:196, 120:216]
    other = 0.6 * crop + 0.2 + 0.05 * wave(crop.shape, 3.0)
    vals["kSsimCamera"] = float(structural_similarity(
        crop, other, gaussian_weights=True, sigma=1.5, use_sample_covariance=False, data_range=1.0))
    vals["kPsnrCamera"] = float(peak_signal_noise_ratio(crop, other, data_range=1.0))

    small = cam[40:104, 200:264]
    coeffs, _ = mscn_maps(small)
    vals["kMscnChecksum"] = checksum(coeffs)
    vals["kMscnMean"] = float(coeffs.mean())

    arrays["kBrisqueCamera"] = brisque(cam[0:128, 128:256])

    names = ["astronaut", "coffee", "chelsea", "rocket", "brick"]
    mu, sigma = niqe_fit([load_gray(f"natural_{n}.png") for n in names])
    vals["kNiqeCamera"] = niqe(cam, mu, sigma)
    vals["kNiqeGrass"] = niqe(load_gray("natural_grass.png"), mu, sigma)
    arrays["kNiqeModelMuHead"] = list(mu[:6])

    pixels = [(0.2, 0.4, 0.6), (0.9, 0.1, 0.3), (0.5, 0.5, 0.1), (0.05, 0.8, 0.79)]
    arrays["kHsvPixels"] = [v for p in pixels for v in colorsys.rgb_to_hsv(*p)]

    lines = [
        "#pragma once",
        "",
        "// Generated by tests/oracles/reference.py; do not edit by hand.",
        "",
        "#include <array>",
        "",
        "namespace vcr::ref {",
        "",
    ]
    for k, v in vals.items():
        lines.append(f"inline constexpr double {k} = {v!r};")
    for k, arr in arrays.items():
        body = ", ".join(repr(float(a)) for a in arr)
        lines.append(f"inline constexpr std::array<double, {len(arr)}> {k}{{{body}}};")
    lines += ["", "}  // namespace vcr::ref", ""]
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text("\n".join(lines))
    print(OUT.read_text())


if __name__ == "__main__":
    main()
