"""SVG comparison of adaptive and uniform frame selections."""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .coverage import CoverageRun, SelectionReport
from .errors import InputError, OutputError
from .scene import SceneManifest

CANVAS_W = 1200
PANEL_W = 570
MARGIN = 20
MAP_H = 420
TILE_H = 56
GRID_CELLS = 96
STAT_FIELDS = ("total_points", "covered_points", "uniform_baseline_covered")


def _sequential_gains(run: CoverageRun, picks: list[int]) -> list[int]:
    covered = np.zeros(max(len(run.cloud), 1), dtype=bool)
    out = []
    for i in picks:
        ids = run.visibility[i].visible
        out.append(int((~covered[ids]).sum()))
        covered[ids] = True
    return out


def _tint(frac: float) -> str:
    # pale yellow -> dark orange by fraction of the largest gain
    frac = min(max(frac, 0.0), 1.0)
    r, g, b = 255, int(235 - 150 * frac), int(180 - 170 * frac)
    return f"rgb({r},{g},{b})"


def _panel(title, x0, y0, run, picks, gains, cams, bounds, stats):
    lo, hi = bounds
    span = np.maximum(hi - lo, 1e-9)
    scale = min((PANEL_W - 20) / span[0], (MAP_H - 20) / span[1])
    ox = x0 + 10 + (PANEL_W - 20 - scale * span[0]) / 2
    oy = y0 + 40 + (MAP_H - 20 - scale * span[1]) / 2

    def to_px(p):
        return ox + (p[0] - lo[0]) * scale, oy + (hi[1] - p[1]) * scale

    parts = [f'<g class="panel" data-x="{x0}" data-y="{y0}" data-w="{PANEL_W}">']
    parts.append(f'<rect class="panel-frame" x="{x0}" y="{y0}" width="{PANEL_W}" '
                 f'height="{MAP_H + TILE_H + 130}" fill="none" stroke="#999"/>')
    parts.append(f'<text x="{x0 + 10}" y="{y0 + 24}" font-size="16" font-family="sans-serif">{escape(title)}</text>')

    # top-down occupancy: each cell shaded by its covered fraction
    pts = run.cloud.points
    covered = np.zeros(len(pts), dtype=bool)
    for i in picks:
        covered[run.visibility[i].visible] = True
    cell = span[:2].max() / GRID_CELLS
    cx = np.minimum(((pts[:, 0] - lo[0]) / cell).astype(int), GRID_CELLS)
    cy = np.minimum(((pts[:, 1] - lo[1]) / cell).astype(int), GRID_CELLS)
    key = cx * (GRID_CELLS + 1) + cy
    uniq, inv = np.unique(key, return_inverse=True)
    tot = np.bincount(inv)
    cov = np.bincount(inv, weights=covered.astype(float))
    for k, n, c in zip(uniq.tolist(), tot.tolist(), cov.tolist()):
        gx, gy = divmod(k, GRID_CELLS + 1)
        px, py = to_px((lo[0] + gx * cell, lo[1] + (gy + 1) * cell))
        frac = c / n
        shade = f"rgb({int(200 - 170 * frac)},{int(200 - 60 * frac)},{int(200 - 120 * frac)})"
        parts.append(f'<rect x="{px:.1f}" y="{py:.1f}" width="{cell * scale:.1f}" '
                     f'height="{cell * scale:.1f}" fill="{shade}"/>')

    top = max(gains) if gains and max(gains) > 0 else 1
    for rank, (i, g) in enumerate(zip(picks, gains)):
        intr, extr = cams[i]
        c = extr.center
        fwd = extr.rotation[2]
        x1, y1 = to_px(c)
        x2, y2 = to_px(c + 0.4 * fwd / max(np.linalg.norm(fwd[:2]), 1e-9))
        parts.append(f'<line x1="{x1:.1f}" y1="{y1:.1f}" x2="{x2:.1f}" y2="{y2:.1f}" stroke="#333" stroke-width="1.5"/>')
        parts.append(f'<circle cx="{x1:.1f}" cy="{y1:.1f}" r="5" fill="{_tint(g / top)}" stroke="#333"/>')

    # one tile per selected frame, tinted by marginal gain
    k = len(picks)
    gap = 6
    tile_w = (PANEL_W - 20 - gap * (k - 1)) / k
    ty = y0 + 50 + MAP_H
    for rank, (fid, g) in enumerate(zip(stats["frame_ids"], gains)):
        tx = x0 + 10 + rank * (tile_w + gap)
        parts.append(f'<rect class="tile" x="{tx:.2f}" y="{ty}" width="{tile_w:.2f}" height="{TILE_H}" '
                     f'fill="{_tint(g / top)}" stroke="#666"/>')
        if tile_w >= 34:
            parts.append(f'<text x="{tx + tile_w / 2:.2f}" y="{ty + 22}" font-size="11" text-anchor="middle" '
                         f'font-family="sans-serif">#{fid}</text>')
            parts.append(f'<text x="{tx + tile_w / 2:.2f}" y="{ty + 40}" font-size="10" text-anchor="middle" '
                         f'font-family="sans-serif">+{g}</text>')
    sy = ty + TILE_H + 22
    for line in stats["lines"]:
        parts.append(f'<text class="stat" x="{x0 + 10}" y="{sy}" font-size="12" '
                     f'font-family="monospace">{escape(line)}</text>')
        sy += 18
    parts.append("</g>")
    return parts


def coverage_svg(report: SelectionReport, run: CoverageRun, manifest: SceneManifest) -> str:
    if run.report.covered_points != report.covered_points or len(run.cloud) != report.total_points:
        raise InputError("selection report does not match the scene it references")
    frames = {f.frame_id: f for f in manifest.frames}
    cand = report.candidate_ids
    pos = {fid: i for i, fid in enumerate(cand)}
    try:
        cams = [(frames[fid].intrinsics, frames[fid].extrinsics) for fid in cand]
        adaptive = [pos[fid] for fid in report.selected_ids]
        uniform = [pos[fid] for fid in report.uniform_ids]
    except KeyError as exc:
        raise InputError(f"report references frame {exc} not in the scene") from None
    pts = run.cloud.points
    centers = np.array([c[1].center for c in cams])
    both = np.concatenate([pts[:, :2], centers[:, :2]]) if len(pts) else centers[:, :2]
    bounds = (both.min(axis=0), both.max(axis=0))
    uni_gains = _sequential_gains(run, uniform)

    def lines(name, covered, ids):
        return [
            f"method: {name}",
            f"total_points: {report.total_points}",
            f"covered_points: {covered}",
            f"frames: {ids}",
        ]

    height = MAP_H + TILE_H + 130 + 70
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS_W}" height="{height}" '
        f'viewBox="0 0 {CANVAS_W} {height}">',
        f'<rect width="{CANVAS_W}" height="{height}" fill="white"/>',
        f'<text x="{MARGIN}" y="30" font-size="18" font-family="sans-serif">'
        f"Frame selection coverage (K={len(report.selected_ids)}, M={len(cand)})</text>",
        f'<text class="summary" x="{MARGIN}" y="52" font-size="12" font-family="monospace">'
        + escape("  ".join(f"{k}: {getattr(report, k)}" for k in STAT_FIELDS))
        + "</text>",
    ]
    out += _panel("(a) adaptive sampling", MARGIN, 64, run, adaptive, report.marginal_gains, cams, bounds,
                  {"frame_ids": report.selected_ids,
                   "lines": lines("adaptive", report.covered_points, report.selected_ids)})
    out += _panel("(b) uniform sampling", MARGIN + PANEL_W + 20, 64, run, uniform, uni_gains, cams, bounds,
                  {"frame_ids": report.uniform_ids,
                   "lines": lines("uniform", report.uniform_baseline_covered, report.uniform_ids)})
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_coverage_figure(report: SelectionReport, run: CoverageRun, manifest: SceneManifest, out_path) -> Path:
    """Write the side-by-side adaptive/uniform coverage figure as SVG."""
    path = Path(out_path)
    svg = coverage_svg(report, run, manifest)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(svg, encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write figure to {path}: {exc}") from exc
    return path
