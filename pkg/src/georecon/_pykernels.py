"""Pure numpy versions of the compiled kernels in ``_ckernels.pyx``."""
import numpy as np


def splat_zbuffer(u, v, z, ids, width, height, half):
    zbuf = np.full((height, width), np.inf)
    win = np.full((height, width), -1, dtype=np.int64)
    if len(u) == 0:
        return zbuf, win
    span = int(np.floor(2.0 * half)) + 3
    lo_u = np.floor(u - half - 0.5).astype(np.int64) - 1
    lo_v = np.floor(v - half - 0.5).astype(np.int64) - 1
    offs = np.arange(span + 1, dtype=np.int64)
    cols = lo_u[:, None] + offs
    rows = lo_v[:, None] + offs
    ok_u = (cols >= 0) & (cols < width) & (np.abs((cols + 0.5) - u[:, None]) <= half)
    ok_v = (rows >= 0) & (rows < height) & (np.abs((rows + 0.5) - v[:, None]) <= half)

    pix, zs, pids = [], [], []
    for a in range(span + 1):
        for b in range(span + 1):
            hit = ok_v[:, a] & ok_u[:, b]
            if not hit.any():
                continue
            pix.append(rows[hit, a] * width + cols[hit, b])
            zs.append(z[hit])
            pids.append(ids[hit])
    if not pix:
        return zbuf, win
    pix = np.concatenate(pix)
    zs = np.concatenate(zs)
    pids = np.concatenate(pids)
    order = np.lexsort((pids, zs, pix))
    pix, zs, pids = pix[order], zs[order], pids[order]
    first = np.ones(len(pix), dtype=bool)
    first[1:] = pix[1:] != pix[:-1]
    zbuf.ravel()[pix[first]] = zs[first]
    win.ravel()[pix[first]] = pids[first]
    return zbuf, win


def uncovered_counts(members, offsets, covered, skip):
    fresh = ~covered.astype(bool)[members]
    csum = np.concatenate([[0], np.cumsum(fresh, dtype=np.int64)])
    counts = csum[offsets[1:]] - csum[offsets[:-1]]
    return np.where(skip.astype(bool), 0, counts).astype(np.int64)
