/**
 * Figure construction: sweep CSV rows -> echarts option -> static SVG.
 *
 * NMSE panels use log axes, so non-positive means (possible after perfect
 * recovery) are clamped to a floor below the smallest positive point.
 */

import * as echarts from "echarts";
import type { EChartsOption, SeriesOption } from "echarts";

import type { MetricName, ResultRow } from "./schema.js";
import { SchemaError } from "./schema.js";
import { aggregate, Series } from "./stats.js";

export type FigureId = "fig2" | "fig3" | "fig4" | "table1";

export const FIGURE_SWEEP: Record<FigureId, string> = {
  fig2: "snr",
  fig3: "nk",
  fig4: "packets",
  table1: "snr",
};

const AXIS_LABEL: Record<string, string> = {
  snr: "SNR (dB)",
  nk: "subcarriers per UE",
  packets: "packets",
};

interface PanelSpec {
  title: string;
  metric: MetricName;
  log: boolean;
}

const THREE_PANELS: PanelSpec[] = [
  { title: "delay NMSE", metric: "nmse_delay", log: true },
  { title: "Doppler NMSE", metric: "nmse_doppler", log: true },
  { title: "AoA RMSE (deg)", metric: "rmse_aoa_deg", log: false },
];

const PALETTE = [
  "#5470c6",
  "#91cc75",
  "#fac858",
  "#ee6666",
  "#73c0de",
  "#3ba272",
];

export function checkSweep(figure: FigureId, rows: ResultRow[]): void {
  const expected = FIGURE_SWEEP[figure];
  const found = new Set(rows.map((r) => r.sweepParam));
  if (found.size !== 1 || !found.has(expected)) {
    throw new SchemaError(
      `figure ${figure} expects a "${expected}" sweep, ` +
        `csv holds: ${[...found].join(", ")}`,
    );
  }
}

function positiveFloor(series: Series[]): number {
  let smallest = Infinity;
  for (const s of series) {
    for (const p of s.points) {
      if (p.mean > 0 && p.mean < smallest) smallest = p.mean;
    }
  }
  return Number.isFinite(smallest) ? smallest / 10 : 1e-12;
}

/* eslint-disable @typescript-eslint/no-explicit-any */
function errorBarRenderer(params: any, api: any) {
  const x = api.value(0);
  const lo = api.value(2);
  const hi = api.value(3);
  const top = api.coord([x, hi]);
  const bottom = api.coord([x, lo]);
  const half = 4;
  const style = { stroke: api.visual("color") as string, lineWidth: 1 };
  const segment = (x1: number, y1: number, x2: number, y2: number) => ({
    type: "line" as const,
    shape: { x1, y1, x2, y2 },
    style,
  });
  return {
    type: "group" as const,
    children: [
      segment(top[0], top[1], bottom[0], bottom[1]),
      segment(top[0] - half, top[1], top[0] + half, top[1]),
      segment(bottom[0] - half, bottom[1], bottom[0] + half, bottom[1]),
    ],
  };
}
/* eslint-enable @typescript-eslint/no-explicit-any */

function panelSeries(
  series: Series[],
  panel: number,
  log: boolean,
): SeriesOption[] {
  const floor = positiveFloor(series);
  const clamp = (v: number) => (log ? Math.max(v, floor) : v);
  const out: SeriesOption[] = [];
  for (const s of series) {
    out.push({
      type: "line",
      name: s.label,
      xAxisIndex: panel,
      yAxisIndex: panel,
      symbol: "circle",
      data: s.points.map((p) => [p.x, clamp(p.mean)]),
    });
    out.push({
      type: "custom",
      name: s.label,
      xAxisIndex: panel,
      yAxisIndex: panel,
      renderItem: errorBarRenderer,
      silent: true,
      data: s.points.map((p) => [
        p.x,
        clamp(p.mean),
        clamp(p.mean - p.stderr),
        clamp(p.mean + p.stderr),
      ]),
    });
  }
  return out;
}

function multiPanelOption(
  rows: ResultRow[],
  panels: PanelSpec[],
  sweepParam: string,
  footer: string,
): EChartsOption {
  const count = panels.length;
  const width = 100 / count;
  const grids = [];
  const xAxes = [];
  const yAxes = [];
  const titles = [];
  const series: SeriesOption[] = [];
  let labels: string[] = [];
  for (let i = 0; i < count; i++) {
    const left = 7 + i * width;
    grids.push({
      left: `${left}%`,
      width: `${width - 10}%`,
      top: 56,
      bottom: 52,
    });
    xAxes.push({
      gridIndex: i,
      type: "value" as const,
      name: AXIS_LABEL[sweepParam] ?? sweepParam,
      nameLocation: "middle" as const,
      nameGap: 26,
    });
    yAxes.push({
      gridIndex: i,
      type: panels[i].log ? ("log" as const) : ("value" as const),
    });
    titles.push({
      text: panels[i].title,
      left: `${left + (width - 10) / 2}%`,
      top: 26,
      textAlign: "center" as const,
      textStyle: { fontSize: 12 },
    });
    const agg = aggregate(rows, panels[i].metric);
    labels = agg.map((s) => s.label);
    series.push(...panelSeries(agg, i, panels[i].log));
  }
  return {
    animation: false,
    color: PALETTE,
    legend: { data: labels, top: 0 },
    grid: grids,
    xAxis: xAxes,
    yAxis: yAxes,
    title: titles,
    series,
    graphic: [
      {
        type: "text",
        left: 8,
        bottom: 4,
        style: { text: footer, fontSize: 10, fill: "#888888" },
      },
    ],
  };
}

export function buildFigure(
  figure: Exclude<FigureId, "table1">,
  rows: ResultRow[],
  footer: string,
): EChartsOption {
  checkSweep(figure, rows);
  const sweepParam = FIGURE_SWEEP[figure];
  if (figure === "fig3") {
    return multiPanelOption(
      rows,
      [{ title: "delay NMSE", metric: "nmse_delay", log: true }],
      sweepParam,
      footer,
    );
  }
  return multiPanelOption(rows, THREE_PANELS, sweepParam, footer);
}

export function renderSvg(
  option: EChartsOption,
  width = 960,
  height = 380,
): string {
  const chart = echarts.init(null, null, {
    renderer: "svg",
    ssr: true,
    width,
    height,
  });
  chart.setOption(option);
  const svg = chart.renderToSVGString();
  chart.dispose();
  // zrender numbers its hover-CSS classes with process-global counters;
  // a static artifact needs no hover styles, and dropping them makes
  // re-rendering the same rows byte-identical
  return svg
    .replace(/<style[^>]*>[\s\S]*?<\/style>/g, "")
    .replace(/ class="zr\d+-cls-\d+"/g, "")
    .replace(/zr\d+-/g, "zr-");
}
