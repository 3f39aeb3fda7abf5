// Minimal dependency-free SVG line chart of entropy (bits) against step.
// Point values are attached as data-entropy attributes exactly as received,
// so tests (and curious users) can read the server's numbers back.

const WIDTH = 640;
const HEIGHT = 280;
const PAD = { left: 44, right: 16, top: 16, bottom: 28 };

export function renderTrajectory(svg: SVGSVGElement, values: number[]): void {
  svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
  svg.innerHTML = "";
  if (values.length === 0) return;

  const maxY = Math.max(...values, 1e-9) * 1.08;
  const innerW = WIDTH - PAD.left - PAD.right;
  const innerH = HEIGHT - PAD.top - PAD.bottom;
  const spanX = Math.max(values.length - 1, 1);
  const x = (i: number) => PAD.left + (i / spanX) * innerW;
  const y = (v: number) => PAD.top + innerH - (v / maxY) * innerH;

  const ns = "http://www.w3.org/2000/svg";
  const make = (tag: string, attrs: Record<string, string>) => {
    const el = document.createElementNS(ns, tag);
    for (const [k, v] of Object.entries(attrs)) el.setAttribute(k, v);
    svg.appendChild(el);
    return el;
  };

  make("line", {
    class: "axis", x1: String(PAD.left), y1: String(PAD.top + innerH),
    x2: String(PAD.left + innerW), y2: String(PAD.top + innerH),
  });
  make("line", {
    class: "axis", x1: String(PAD.left), y1: String(PAD.top),
    x2: String(PAD.left), y2: String(PAD.top + innerH),
  });

  for (const frac of [0, 0.5, 1]) {
    const v = maxY * frac;
    const label = make("text", {
      class: "tick", x: String(PAD.left - 6), y: String(y(v) + 4), "text-anchor": "end",
    });
    label.textContent = v.toFixed(1);
  }

  if (values.length > 1) {
    make("polyline", {
      class: "trajectory",
      points: values.map((v, i) => `${x(i)},${y(v)}`).join(" "),
      fill: "none",
    });
  }

  values.forEach((v, i) => {
    make("circle", {
      class: "pt", cx: String(x(i)), cy: String(y(v)), r: "4.5",
      "data-step": String(i), "data-entropy": String(v),
    });
    const label = make("text", {
      class: "tick", x: String(x(i)), y: String(PAD.top + innerH + 18),
      "text-anchor": "middle",
    });
    label.textContent = String(i);
  });
}
