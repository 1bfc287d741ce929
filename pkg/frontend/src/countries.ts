// Static country-code -> (latitude, longitude) anchors for the map panel.

export const COUNTRY_COORDS: Record<string, [number, number]> = {
  US: [39.8, -98.6],
  GB: [54.0, -2.5],
  DE: [51.2, 10.4],
  BR: [-10.8, -52.9],
  IN: [22.9, 79.6],
  JP: [36.5, 138.0],
  NG: [9.1, 8.7],
  AU: [-25.7, 134.5],
};

const FALLBACK: [number, number] = [0, 0];

export function countryPoint(code: string, width: number, height: number,
                             jitterKey = 0): { x: number; y: number } {
  const [lat, lon] = COUNTRY_COORDS[code] ?? FALLBACK;
  // Deterministic spread so markers sharing a country stay distinguishable.
  const angle = (jitterKey * 2.399963) % (2 * Math.PI); // golden angle steps
  const radius = jitterKey === 0 ? 0 : 6 + (jitterKey % 3) * 4;
  const x = ((lon + 180) / 360) * width + radius * Math.cos(angle);
  const y = ((90 - lat) / 180) * height + radius * Math.sin(angle);
  return { x, y };
}
