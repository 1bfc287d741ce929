import { countryPoint } from "../countries.js";
import type { MapResponse } from "../types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const WIDTH = 720;
const HEIGHT = 360;

function circle(x: number, y: number, r: number, className: string,
                id: number, title: string): SVGCircleElement {
  const dot = document.createElementNS(SVG_NS, "circle");
  dot.setAttribute("cx", x.toFixed(1));
  dot.setAttribute("cy", y.toFixed(1));
  dot.setAttribute("r", r.toFixed(1));
  dot.setAttribute("class", className);
  dot.dataset.id = String(id);
  const tip = document.createElementNS(SVG_NS, "title");
  tip.textContent = title;
  dot.appendChild(tip);
  return dot;
}

/** Green dots: current connections. Red dots: predicted future connections. */
export function renderMap(root: HTMLElement, data: MapResponse): void {
  root.replaceChildren();
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
  svg.setAttribute("class", "world-map");

  for (let lon = 0; lon <= 360; lon += 45) {
    const line = document.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", String((lon / 360) * WIDTH));
    line.setAttribute("x2", String((lon / 360) * WIDTH));
    line.setAttribute("y1", "0");
    line.setAttribute("y2", String(HEIGHT));
    line.setAttribute("class", "graticule");
    svg.appendChild(line);
  }
  for (let lat = 0; lat <= 180; lat += 45) {
    const line = document.createElementNS(SVG_NS, "line");
    line.setAttribute("y1", String((lat / 180) * HEIGHT));
    line.setAttribute("y2", String((lat / 180) * HEIGHT));
    line.setAttribute("x1", "0");
    line.setAttribute("x2", String(WIDTH));
    line.setAttribute("class", "graticule");
    svg.appendChild(line);
  }

  for (const marker of data.current) {
    const { x, y } = countryPoint(marker.country, WIDTH, HEIGHT, marker.id);
    svg.appendChild(circle(x, y, 6, "marker marker-current", marker.id,
                           `user ${marker.id} (${marker.country})`));
  }
  for (const marker of data.predicted) {
    const confidence = marker.confidence ?? 0;
    const { x, y } = countryPoint(marker.country, WIDTH, HEIGHT, marker.id);
    svg.appendChild(circle(x, y, 4 + 5 * confidence, "marker marker-predicted",
                           marker.id,
                           `user ${marker.id} (${marker.country}) ` +
                           `confidence ${confidence.toFixed(2)}`));
  }
  root.appendChild(svg);

  const legend = document.createElement("p");
  legend.className = "map-legend";
  legend.innerHTML =
    '<span class="swatch swatch-current"></span> connected now ' +
    '<span class="swatch swatch-predicted"></span> predicted connection';
  root.appendChild(legend);
}
