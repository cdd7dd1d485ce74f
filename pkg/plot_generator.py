"""
Figure rendering for band diagrams, Fermi contours and spectrum-vs-mu maps.
- SVG written as plain rect/circle/line primitives, viewBox scaled to the data
- PNG rendered with Pillow at 2x and downsampled for clean edges
"""

import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple

from PIL import Image, ImageDraw, ImageFilter, ImageFont

from errors import ValidationError

LOGGER = logging.getLogger(__name__)

PlotKind = Literal["band-diagram", "fermi-contour", "spectrum-vs-mu", "dirac-points"]
PLOT_KINDS = ("band-diagram", "fermi-contour", "spectrum-vs-mu", "dirac-points")

DEFAULT_SETTINGS = {
    "width": 800,
    "height": 500,
    "margin": 60,
    "background": "#ffffff",
    "axis": "#222222",
    "palette": ["#1f5fa8", "#c0392b", "#2e8b57", "#d4a017", "#6a3d9a"],
    "point_radius": 3,
    "line_width": 1,
}


@dataclass(frozen=True)
class PlotSeries:
    """One labelled data set.

    style "rects": (x0, x1, y0, y1) tuples; "points": (x, y); "lines": (x0, y0, x1, y1).
    """

    label: str
    style: Literal["rects", "points", "lines"]
    data: Tuple[Tuple[float, ...], ...]
    color: Optional[str] = None


@dataclass(frozen=True)
class PlotSpec:
    kind: str
    x_range: Tuple[float, float]
    y_range: Tuple[float, float]
    series: Tuple[PlotSeries, ...] = field(default_factory=tuple)
    title: str = ""
    x_label: str = ""
    y_label: str = ""

    def __post_init__(self):
        if self.kind not in PLOT_KINDS:
            raise ValidationError(f"unknown plot kind {self.kind!r}")
        for lo, hi in (self.x_range, self.y_range):
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
                raise ValidationError(f"plot range [{lo}, {hi}] must be finite and non-empty")


def load_plot_settings(path: str = "plot_settings.json") -> Dict[str, dict]:
    """Load per-kind plot settings from JSON, falling back to defaults"""
    settings = {kind: dict(DEFAULT_SETTINGS) for kind in PLOT_KINDS}
    try:
        if os.path.exists(path):
            with open(path, "r") as f:
                settings_data = json.load(f)

            for kind, overrides in settings_data.items():
                if kind not in settings or not isinstance(overrides, dict):
                    LOGGER.warning(f"⚠️ Ignoring plot settings for unknown kind {kind!r}")
                    continue
                settings[kind].update(overrides)

            LOGGER.debug(f"Loaded plot settings for {len(settings_data)} kinds from {path}")
    except Exception as e:
        LOGGER.error(f"Failed to load plot settings from {path}: {e}")
        settings = {kind: dict(DEFAULT_SETTINGS) for kind in PLOT_KINDS}
    return settings


def _hex_to_rgb(color: str) -> Tuple[int, int, int]:
    color = color.lstrip("#")
    return int(color[0:2], 16), int(color[2:4], 16), int(color[4:6], 16)


def _fmt(x: float) -> str:
    return f"{x:.3f}".rstrip("0").rstrip(".")


class PlotGenerator:
    def __init__(self, settings: Optional[Dict[str, dict]] = None):
        self.settings = settings if settings is not None else load_plot_settings()
        self.scale = 2
        self.bold_font_path = "/usr/share/fonts/truetype/dejavu/DejaVuSans-Bold.ttf"
        self.reg_font_path = "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf"

    def _style(self, spec: PlotSpec) -> dict:
        return self.settings.get(spec.kind, DEFAULT_SETTINGS)

    def _color(self, style: dict, series: PlotSeries, index: int) -> str:
        if series.color:
            return series.color
        palette = style.get("palette") or DEFAULT_SETTINGS["palette"]
        return palette[index % len(palette)]

    def _mapper(self, spec: PlotSpec, width: float, height: float, margin: float):
        (x0, x1), (y0, y1) = spec.x_range, spec.y_range
        plot_w, plot_h = width - 2 * margin, height - 2 * margin

        def to_px(x: float, y: float) -> Tuple[float, float]:
            px = margin + (x - x0) / (x1 - x0) * plot_w
            py = height - margin - (y - y0) / (y1 - y0) * plot_h
            return px, py

        return to_px

    def render_svg(self, spec: PlotSpec) -> str:
        style = self._style(spec)
        width, height, margin = style["width"], style["height"], style["margin"]
        to_px = self._mapper(spec, width, height, margin)
        radius = style["point_radius"]
        line_width = style["line_width"]

        out: List[str] = [
            f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" width="{width}" height="{height}">',
            f'<rect x="0" y="0" width="{width}" height="{height}" fill="{style["background"]}"/>',
        ]
        for index, series in enumerate(spec.series):
            color = self._color(style, series, index)
            out.append(f'<g fill="{color}" stroke="{color}"><title>{series.label}</title>')
            for item in series.data:
                if series.style == "rects":
                    xa, ya = to_px(item[0], item[3])
                    xb, yb = to_px(item[1], item[2])
                    out.append(f'<rect x="{_fmt(xa)}" y="{_fmt(ya)}" width="{_fmt(max(xb - xa, 0.5))}" '
                               f'height="{_fmt(max(yb - ya, 0.5))}" stroke="none"/>')
                elif series.style == "points":
                    px, py = to_px(item[0], item[1])
                    out.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="{radius}"/>')
                else:
                    xa, ya = to_px(item[0], item[1])
                    xb, yb = to_px(item[2], item[3])
                    out.append(f'<line x1="{_fmt(xa)}" y1="{_fmt(ya)}" x2="{_fmt(xb)}" y2="{_fmt(yb)}" '
                               f'stroke-width="{line_width}"/>')
            out.append("</g>")

        out.extend(self._svg_axes(spec, style, to_px))
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def _svg_axes(self, spec: PlotSpec, style: dict, to_px) -> List[str]:
        (x0, x1), (y0, y1) = spec.x_range, spec.y_range
        ax, ay = to_px(x0, y0)
        bx, by = to_px(x1, y1)
        axis = style["axis"]
        lines = [
            f'<rect x="{_fmt(ax)}" y="{_fmt(by)}" width="{_fmt(bx - ax)}" height="{_fmt(ay - by)}" '
            f'fill="none" stroke="{axis}"/>',
            f'<text x="{_fmt(ax)}" y="{_fmt(ay + 16)}" font-size="12" fill="{axis}">{x0:.4g}</text>',
            f'<text x="{_fmt(bx)}" y="{_fmt(ay + 16)}" font-size="12" text-anchor="end" fill="{axis}">{x1:.4g}</text>',
            f'<text x="{_fmt(ax - 6)}" y="{_fmt(ay)}" font-size="12" text-anchor="end" fill="{axis}">{y0:.4g}</text>',
            f'<text x="{_fmt(ax - 6)}" y="{_fmt(by + 12)}" font-size="12" text-anchor="end" fill="{axis}">{y1:.4g}</text>',
        ]
        if spec.x_label:
            lines.append(f'<text x="{_fmt((ax + bx) / 2)}" y="{_fmt(ay + 32)}" font-size="13" '
                         f'text-anchor="middle" fill="{axis}">{spec.x_label}</text>')
        if spec.y_label:
            lines.append(f'<text x="16" y="{_fmt((ay + by) / 2)}" font-size="13" text-anchor="middle" '
                         f'fill="{axis}" transform="rotate(-90 16 {_fmt((ay + by) / 2)})">{spec.y_label}</text>')
        if spec.title:
            lines.append(f'<text x="{_fmt((ax + bx) / 2)}" y="24" font-size="15" text-anchor="middle" '
                         f'fill="{axis}">{spec.title}</text>')
        return lines

    def render_png(self, spec: PlotSpec) -> Image.Image:
        """Render at 2x, then downsample and sharpen"""
        style = self._style(spec)
        width, height = style["width"], style["height"]
        W, H = width * self.scale, height * self.scale
        margin = style["margin"] * self.scale
        to_px = self._mapper(spec, W, H, margin)

        img = Image.new("RGB", (W, H), _hex_to_rgb(style["background"]))
        draw = ImageDraw.Draw(img)
        radius = style["point_radius"] * self.scale
        line_width = max(1, style["line_width"] * self.scale)

        for index, series in enumerate(spec.series):
            color = _hex_to_rgb(self._color(style, series, index))
            for item in series.data:
                if series.style == "rects":
                    xa, ya = to_px(item[0], item[3])
                    xb, yb = to_px(item[1], item[2])
                    draw.rectangle((xa, ya, max(xb, xa + 1), max(yb, ya + 1)), fill=color)
                elif series.style == "points":
                    px, py = to_px(item[0], item[1])
                    draw.ellipse((px - radius, py - radius, px + radius, py + radius), fill=color)
                else:
                    xa, ya = to_px(item[0], item[1])
                    xb, yb = to_px(item[2], item[3])
                    draw.line((xa, ya, xb, yb), fill=color, width=line_width)

        axis = _hex_to_rgb(style["axis"])
        (x0, x1), (y0, y1) = spec.x_range, spec.y_range
        ax, ay = to_px(x0, y0)
        bx, by = to_px(x1, y1)
        draw.rectangle((ax, by, bx, ay), outline=axis, width=self.scale)
        s = self.scale
        tick_font = self._fit_font(self.reg_font_path, f"{x0:.4g}", 12 * s, draw, margin)
        for text, x, y, anchor in ((f"{x0:.4g}", ax, ay + 4 * s, "la"), (f"{x1:.4g}", bx, ay + 4 * s, "ra"),
                                   (f"{y0:.4g}", ax - 6 * s, ay, "rs"), (f"{y1:.4g}", ax - 6 * s, by, "ra")):
            draw.text((x, y), text, font=tick_font, fill=axis, anchor=anchor)
        if spec.x_label:
            font = self._fit_font(self.reg_font_path, spec.x_label, 13 * s, draw, bx - ax)
            draw.text(((ax + bx) / 2, ay + 20 * s), spec.x_label, font=font, fill=axis, anchor="ma")
        if spec.y_label:
            font = self._fit_font(self.reg_font_path, spec.y_label, 13 * s, draw, ay - by)
            right, bottom = draw.textbbox((0, 0), spec.y_label, font=font)[2:]
            label = Image.new("RGBA", (int(right) + 4 * s, int(bottom) + 4 * s), (0, 0, 0, 0))
            ImageDraw.Draw(label).text((2 * s, 2 * s), spec.y_label, font=font, fill=axis + (255,))
            label = label.rotate(90, expand=True)
            img.paste(label, (4 * s, int((ay + by - label.height) / 2)), label)
        if spec.title:
            font = self._fit_font(self.bold_font_path, spec.title, 15 * self.scale, draw, W - 2 * margin)
            w, _ = self._text_size(draw, spec.title, font)
            draw.text(((W - w) // 2, 8 * self.scale), spec.title, font=font, fill=axis)

        img = img.resize((width, height), Image.Resampling.LANCZOS)
        return img.filter(ImageFilter.UnsharpMask(radius=1, percent=140, threshold=2))

    def save(self, spec: PlotSpec, path: str) -> str:
        """Write the figure; a .png suffix selects the raster renderer"""
        if path.lower().endswith(".png"):
            self.render_png(spec).save(path, format="PNG", optimize=True)
        else:
            with open(path, "w") as f:
                f.write(self.render_svg(spec))
        LOGGER.info(f"📝 Wrote {spec.kind} plot to {path}")
        return path

    def _text_size(self, draw, text, font):
        bbox = draw.textbbox((0, 0), text, font=font)
        return bbox[2] - bbox[0], bbox[3] - bbox[1]

    def _fit_font(self, path, text, max_px, draw, max_width):
        try:
            ImageFont.truetype(path, 12)
        except Exception:
            return ImageFont.load_default()

        lo, hi = 8, max_px
        best = lo
        while lo <= hi:
            mid = (lo + hi) // 2
            font = ImageFont.truetype(path, mid)
            w, _ = self._text_size(draw, text, font)
            if w <= max_width:
                best = mid
                lo = mid + 1
            else:
                hi = mid - 1
        return ImageFont.truetype(path, best)


def padded_range(values: Sequence[float], pad: float = 0.05, fallback: Tuple[float, float] = (0.0, 1.0)) -> Tuple[float, float]:
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return fallback
    lo, hi = min(finite), max(finite)
    if hi - lo < 1e-12:
        return lo - 0.5, hi + 0.5
    span = hi - lo
    return lo - pad * span, hi + pad * span
