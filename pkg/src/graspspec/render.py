"""Deterministic SVG rendering: bifrequency heatmaps/contours and scalp maps.

Everything here is hand-rolled on purpose: a fixed 64-level palette, fixed
number formatting and no timestamps mean the same grid always produces the
same bytes, which the pipeline treats as a contract.  Scalp topographies use
inverse-distance-weighted interpolation (power 2) of the per-electrode
scalars onto a 64 x 64 unit-disk grid; IDW is exact at the electrodes and
never leaves the [min, max] range of the inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hos import SegmentPlan, SpectralGrid, segment
from .ingest import EpochSet

N_PALETTE = 64
TOPO_GRID = 64

# Sequential ramp anchors (dark violet -> teal -> yellow).
_SEQ_ANCHORS = np.array(
    [
        (68, 1, 84),
        (59, 82, 139),
        (33, 145, 140),
        (94, 201, 98),
        (253, 231, 37),
    ],
    dtype=float,
)


def _interp_anchors(anchors: np.ndarray, n: int) -> list[str]:
    pos = np.linspace(0.0, 1.0, len(anchors))
    t = np.linspace(0.0, 1.0, n)
    rgb = np.stack([np.interp(t, pos, anchors[:, c]) for c in range(3)], axis=1)
    return ["#%02x%02x%02x" % tuple(int(round(v)) for v in row) for row in rgb]


def sequential_palette() -> list[str]:
    return _interp_anchors(_SEQ_ANCHORS, N_PALETTE)


def cyclic_palette() -> list[str]:
    """64 hues around the HSV wheel; level 0 and level 63 nearly meet."""
    out = []
    for i in range(N_PALETTE):
        h = i / N_PALETTE * 6.0
        x = 1.0 - abs(h % 2.0 - 1.0)
        sector = int(h) % 6
        r, g, b = [
            (1.0, x, 0.0),
            (x, 1.0, 0.0),
            (0.0, 1.0, x),
            (0.0, x, 1.0),
            (x, 0.0, 1.0),
            (1.0, 0.0, x),
        ][sector]
        out.append("#%02x%02x%02x" % (int(round(255 * r)), int(round(255 * g)), int(round(255 * b))))
    return out


def _level(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    values = np.nan_to_num(np.asarray(values, dtype=float), nan=lo)
    if hi <= lo:
        return np.zeros(values.shape, dtype=int)
    lvl = np.floor((values - lo) / (hi - lo) * N_PALETTE).astype(int)
    return np.clip(lvl, 0, N_PALETTE - 1)


@dataclass
class TopoLayout:
    """Electrode names and 2D positions inside the unit head disk."""

    electrodes: list[tuple[str, float, float]]

    def __post_init__(self):
        names = [e[0] for e in self.electrodes]
        if len(set(names)) != len(names):
            raise ValueError("electrode names must be unique")
        for name, x, y in self.electrodes:
            if x * x + y * y > 1.0 + 1e-9:
                raise ValueError(f"electrode {name} at ({x}, {y}) lies outside the unit disk")

    def positions(self, channel_names) -> np.ndarray:
        by_name = {e[0]: (e[1], e[2]) for e in self.electrodes}
        missing = [c for c in channel_names if c not in by_name]
        if missing:
            raise ValueError(f"channels missing from layout: {missing}")
        return np.array([by_name[c] for c in channel_names])


DEFAULT_LAYOUT = TopoLayout(
    [
        ("Fz", 0.0, 0.5),
        ("C3", -0.5, 0.0),
        ("Cz", 0.0, 0.0),
        ("C4", 0.5, 0.0),
        ("Pz", 0.0, -0.5),
        ("PO7", -0.53, -0.73),
        ("Oz", 0.0, -0.9),
        ("PO8", 0.53, -0.73),
    ]
)


# ---------------------------------------------------------------------------
# bifrequency grid rendering


def grid_csv(grid: SpectralGrid) -> str:
    """Exact full-grid export: k1,k2,f1_hz,f2_hz then real,imag or magnitude."""
    n = grid.nfft
    freqs = grid.bin_frequencies()
    real_valued = grid.kind == "bicoherence"
    header = "k1,k2,f1_hz,f2_hz," + ("magnitude" if real_valued else "real,imag")
    lines = [header]
    for k1 in range(n):
        f1 = freqs[k1]
        for k2 in range(n):
            v = grid.values[k1, k2]
            if real_valued:
                tail = repr(float(v))
            else:
                tail = f"{v.real!r},{v.imag!r}"
            lines.append(f"{k1},{k2},{f1:.6f},{freqs[k2]:.6f},{tail}")
    return "\n".join(lines) + "\n"


def _display_order(grid: SpectralGrid, freq_limit_hz: float):
    freqs = grid.bin_frequencies()
    order = np.argsort(freqs, kind="stable")
    keep = order[np.abs(freqs[order]) <= freq_limit_hz]
    if keep.size == 0:
        raise ValueError(f"freq limit {freq_limit_hz} Hz keeps no bins")
    return keep, freqs[keep]


def _marching_squares(z: np.ndarray, level: float):
    """Iso-line segments of a scalar field on integer node coordinates."""
    segs = []
    rows, cols = z.shape

    def cross(a, b, va, vb):
        t = (level - va) / (vb - va)
        return (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))

    for i in range(rows - 1):
        for j in range(cols - 1):
            v = [z[i, j], z[i, j + 1], z[i + 1, j + 1], z[i + 1, j]]
            corners = [(j, i), (j + 1, i), (j + 1, i + 1), (j, i + 1)]
            case = sum(1 << k for k in range(4) if v[k] >= level)
            if case in (0, 15):
                continue
            edges = {
                "t": cross(corners[0], corners[1], v[0], v[1]) if (v[0] >= level) != (v[1] >= level) else None,
                "r": cross(corners[1], corners[2], v[1], v[2]) if (v[1] >= level) != (v[2] >= level) else None,
                "b": cross(corners[3], corners[2], v[3], v[2]) if (v[3] >= level) != (v[2] >= level) else None,
                "l": cross(corners[0], corners[3], v[0], v[3]) if (v[0] >= level) != (v[3] >= level) else None,
            }
            pts = [p for p in (edges["t"], edges["r"], edges["b"], edges["l"]) if p is not None]
            if len(pts) == 2:
                segs.append((pts[0], pts[1]))
            elif len(pts) == 4:  # saddle: fixed pairing
                segs.append((pts[0], pts[1]))
                segs.append((pts[2], pts[3]))
    return segs


def render_grid(grid: SpectralGrid, style: str = "heatmap", freq_limit_hz: float = 30.0):
    """Render a bifrequency grid; returns (svg_text, csv_text).

    The SVG shows |values| over the symmetric +/- freq_limit_hz range with
    the fixed 64-level palette; the CSV twin carries the exact full grid.
    Contour style overlays 10 iso-lines on the same fill.
    """
    if style not in ("heatmap", "contour"):
        raise ValueError(f"style must be 'heatmap' or 'contour', got {style!r}")
    if freq_limit_hz > grid.fs_hz / 2:
        raise ValueError(f"freq limit {freq_limit_hz} exceeds Nyquist {grid.fs_hz / 2}")
    keep, freqs = _display_order(grid, freq_limit_hz)
    mag = np.abs(grid.values)[np.ix_(keep, keep)]
    lo, hi = 0.0, float(mag.max())
    levels = _level(mag, lo, hi)
    palette = sequential_palette()

    cell = 6
    margin_l, margin_b, margin_t, margin_r = 46, 34, 10, 10
    npix = keep.size
    width = margin_l + npix * cell + margin_r
    height = margin_t + npix * cell + margin_b
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    # x axis: f1 ascending left->right; y axis: f2 ascending bottom->top
    for i in range(npix):  # k1 / columns
        x = margin_l + i * cell
        for j in range(npix):  # k2 / rows
            y = margin_t + (npix - 1 - j) * cell
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{palette[levels[i, j]]}"/>'
            )
    if style == "contour" and hi > lo:
        iso = [lo + (hi - lo) * (t + 1) / 11.0 for t in range(10)]
        for lv in iso:
            for (x0, y0), (x1, y1) in _marching_squares(mag.T, lv):
                # marching squares works on (row=k2, col=k1) nodes
                px0 = margin_l + (x0 + 0.5) * cell
                py0 = margin_t + (npix - 1 - y0 + 0.5) * cell
                px1 = margin_l + (x1 + 0.5) * cell
                py1 = margin_t + (npix - 1 - y1 + 0.5) * cell
                parts.append(
                    f'<line x1="{px0:.2f}" y1="{py0:.2f}" x2="{px1:.2f}" y2="{py1:.2f}" '
                    f'stroke="#000000" stroke-width="0.5"/>'
                )
    # axes and tick labels every 10 Hz
    axis_y = margin_t + npix * cell
    parts.append(
        f'<line x1="{margin_l}" y1="{axis_y}" x2="{margin_l + npix * cell}" y2="{axis_y}" '
        f'stroke="#000000" stroke-width="1"/>'
    )
    parts.append(
        f'<line x1="{margin_l}" y1="{margin_t}" x2="{margin_l}" y2="{axis_y}" '
        f'stroke="#000000" stroke-width="1"/>'
    )
    tick_vals = [t for t in range(-int(freq_limit_hz), int(freq_limit_hz) + 1, 10)]
    for tv in tick_vals:
        i = int(np.argmin(np.abs(freqs - tv)))
        x = margin_l + (i + 0.5) * cell
        y = margin_t + (npix - 1 - i + 0.5) * cell
        parts.append(
            f'<text x="{x:.1f}" y="{axis_y + 14}" font-family="monospace" font-size="9" '
            f'text-anchor="middle" fill="#000000">{tv}</text>'
        )
        parts.append(
            f'<text x="{margin_l - 4}" y="{y:.1f}" font-family="monospace" font-size="9" '
            f'text-anchor="end" fill="#000000">{tv}</text>'
        )
    parts.append(
        f'<text x="{margin_l + npix * cell / 2:.1f}" y="{height - 6}" font-family="monospace" '
        f'font-size="10" text-anchor="middle" fill="#000000">f1 (Hz)</text>'
    )
    parts.append(
        f'<text x="12" y="{margin_t + npix * cell / 2:.1f}" font-family="monospace" '
        f'font-size="10" text-anchor="middle" fill="#000000" '
        f'transform="rotate(-90 12 {margin_t + npix * cell / 2:.1f})">f2 (Hz)</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n", grid_csv(grid)


# ---------------------------------------------------------------------------
# scalp topography


def idw_interpolate(points: np.ndarray, values: np.ndarray, queries: np.ndarray, power: float = 2.0) -> np.ndarray:
    """Inverse-distance-weighted interpolation; exact where a query hits a point."""
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    queries = np.asarray(queries, dtype=float)
    d = np.sqrt(np.sum((queries[:, None, :] - points[None, :, :]) ** 2, axis=2))
    out = np.empty(queries.shape[0])
    hit = d < 1e-12
    exact = hit.any(axis=1)
    out[exact] = values[np.argmax(hit[exact], axis=1)]
    rest = ~exact
    if rest.any():
        w = 1.0 / d[rest] ** power
        out[rest] = (w @ values) / w.sum(axis=1)
    return out


def topomap_scalars(
    epoch_set: EpochSet,
    layout: TopoLayout,
    f_hz: float = 14.0,
    t_center_s: float = 2.0,
    quantity: str = "magnitude",
    plan: SegmentPlan | None = None,
) -> np.ndarray:
    """Per-channel bispectrum scalar at the diagonal bin nearest (f, f).

    A 1 s window centered at t_center is mean-removed, tapered, zero-padded
    to nfft, and its single-segment bispectrum evaluated at (k, k) with
    k = round(f * nfft / fs).  The complex values are averaged across epochs
    first; ``quantity`` then takes magnitude or phase.
    """
    if quantity not in ("magnitude", "phase"):
        raise ValueError(f"quantity must be 'magnitude' or 'phase', got {quantity!r}")
    plan = plan or SegmentPlan()
    fs = epoch_set.fs_hz
    half = int(round(0.5 * fs))
    i0 = int(round(t_center_s * fs)) - half
    i1 = i0 + 2 * half
    if i0 < 0 or i1 > epoch_set.n_samples:
        raise ValueError(
            f"window [{t_center_s - 0.5}, {t_center_s + 0.5}] s out of bounds for "
            f"{epoch_set.n_samples / fs} s epochs"
        )
    layout.positions(epoch_set.channel_names)  # validates channel coverage
    k = int(round(f_hz * plan.nfft / fs))
    n_ch = len(epoch_set.channel_names)
    acc = np.zeros(n_ch, dtype=complex)
    for epoch in epoch_set.epochs:
        for c in range(n_ch):
            spec = segment(epoch.data[c, i0:i1], plan, fs, zero_pad=True)
            x = spec.spectra[0]
            acc[c] += x[k] * x[k] * np.conj(x[(2 * k) % plan.nfft])
    acc /= len(epoch_set.epochs)
    return np.abs(acc) if quantity == "magnitude" else np.angle(acc)


def topo_grid(scalars: np.ndarray, positions: np.ndarray):
    """IDW-interpolated (TOPO_GRID x TOPO_GRID) field over the unit disk.

    Returns (xs, ys, field, mask) with NaN outside the disk.
    """
    xs = np.linspace(-1.0, 1.0, TOPO_GRID)
    ys = np.linspace(-1.0, 1.0, TOPO_GRID)
    gx, gy = np.meshgrid(xs, ys)
    inside = gx**2 + gy**2 <= 1.0
    queries = np.column_stack([gx[inside], gy[inside]])
    field = np.full(gx.shape, np.nan)
    field[inside] = idw_interpolate(positions, scalars, queries)
    return xs, ys, field, inside


def topo_csv(xs, ys, field) -> str:
    lines = ["ix,iy,x,y,value"]
    for iy in range(len(ys)):
        for ix in range(len(xs)):
            v = field[iy, ix]
            if np.isnan(v):
                continue
            lines.append(f"{ix},{iy},{xs[ix]:.6f},{ys[iy]:.6f},{v!r}")
    return "\n".join(lines) + "\n"


def render_topomap(
    scalars: np.ndarray,
    layout: TopoLayout,
    channel_names,
    quantity: str = "magnitude",
    title: str = "",
):
    """Render one scalp map; returns (svg_text, csv_text).

    Magnitude maps normalize to the [min, max] of the channel scalars on the
    sequential palette; phase maps use the cyclic palette on (-pi, pi].
    """
    positions = layout.positions(channel_names)
    xs, ys, field, inside = topo_grid(np.asarray(scalars, dtype=float), positions)
    if quantity == "phase":
        palette = cyclic_palette()
        levels = _level(field, -np.pi, np.pi)
    else:
        palette = sequential_palette()
        levels = _level(field, float(np.min(scalars)), float(np.max(scalars)))

    cell = 5
    size = TOPO_GRID * cell
    margin = 28
    width = height = size + 2 * margin
    cx = cy = margin + size / 2
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    for iy in range(TOPO_GRID):
        for ix in range(TOPO_GRID):
            if not inside[iy, ix]:
                continue
            x = margin + ix * cell
            y = margin + (TOPO_GRID - 1 - iy) * cell
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{palette[levels[iy, ix]]}"/>'
            )
    r = size / 2
    parts.append(
        f'<circle cx="{cx:.1f}" cy="{cy:.1f}" r="{r:.1f}" fill="none" '
        f'stroke="#000000" stroke-width="2"/>'
    )
    parts.append(  # nose
        f'<path d="M {cx - 10:.1f} {margin} L {cx:.1f} {margin - 12} L {cx + 10:.1f} {margin}" '
        f'fill="none" stroke="#000000" stroke-width="2"/>'
    )
    for name, (px, py) in zip(channel_names, positions):
        ex = cx + px * r
        ey = cy - py * r
        parts.append(f'<circle cx="{ex:.1f}" cy="{ey:.1f}" r="2.5" fill="#000000"/>')
        parts.append(
            f'<text x="{ex:.1f}" y="{ey - 5:.1f}" font-family="monospace" font-size="9" '
            f'text-anchor="middle" fill="#000000">{name}</text>'
        )
    if title:
        parts.append(
            f'<text x="{cx:.1f}" y="{height - 8}" font-family="monospace" font-size="11" '
            f'text-anchor="middle" fill="#000000">{title}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n", topo_csv(xs, ys, field)
