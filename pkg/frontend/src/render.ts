import type { DrilldownPage, GroupView, JobView, KeypointsView } from "./types.js";
import type { StagedEdit } from "./state.js";

/** Plain-text views; every renderer is a pure payload-to-string function. */

export function renderJobBanner(job: JobView): string {
  const error = job.error ? ` error=${job.error.code}` : "";
  return (
    `job ${job.job_id} [${job.domain}] status=${job.status} ` +
    `versions=${job.versions} pending_edits=${job.pending_revisions}${error}`
  );
}

function renderGroup(group: GroupView): string[] {
  const stance = group.stance === null ? "" : ` / ${group.stance}`;
  const lines = [
    `topic: ${group.topic}${stance} (${group.comment_count} comments, ` +
      `coverage ${Math.round(group.coverage * 100)}%)`,
  ];
  for (const kp of group.key_points) {
    lines.push(
      `  ${kp.id}  ${String(kp.percent).padStart(3)}%  ` +
        `(${kp.comment_count} comments, ${kp.match_count} matched)  ${kp.text}`,
    );
  }
  if (group.unmatched.length > 0) {
    lines.push(`  unmatched: ${group.unmatched.join(", ")}`);
  }
  return lines;
}

export function renderKeypoints(view: KeypointsView): string {
  const lines = [`version ${view.version} of job ${view.job_id}`];
  for (const group of view.groups) {
    lines.push(...renderGroup(group));
  }
  return lines.join("\n");
}

export function renderDrilldown(page: DrilldownPage): string {
  const pages = Math.max(1, Math.ceil(page.total / page.size));
  const lines = [
    `${page.kp_id} matches, page ${page.page}/${pages} (${page.total} total)`,
  ];
  for (const item of page.items) {
    const tag = item.kind === "candidate" ? " [kp]" : "";
    lines.push(`  ${item.id}  ${item.score.toFixed(3)}${tag}  ${item.text}`);
  }
  if (page.items.length === 0) {
    lines.push("  (no matches on this page)");
  }
  return lines.join("\n");
}

export function renderStagedEdits(edits: readonly StagedEdit[]): string {
  if (edits.length === 0) {
    return "no staged edits";
  }
  const lines = edits.map((e) => {
    if (e.kind === "delete") return `  delete ${e.kpId}`;
    if (e.kind === "add") return `  add ${e.kpId}: ${e.text}`;
    return `  rename ${e.kpId}: ${e.text}`;
  });
  return ["staged edits:", ...lines].join("\n");
}
