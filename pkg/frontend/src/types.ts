/** Payload shapes of the analysis job service, as consumed by the console. */

export interface JobView {
  job_id: string;
  status: "pending" | "running" | "done" | "failed";
  versions: number;
  error: { code: string; message: string } | null;
  domain: string;
  pending_revisions: number;
}

export interface KeyPointSummary {
  id: string;
  text: string;
  source_comment_id: string;
  token_count: number;
  quality: number;
  match_count: number;
  comment_count: number;
  prevalence: number;
  percent: number;
}

export interface GroupView {
  topic: string;
  stance: string | null;
  comment_count: number;
  coverage: number;
  unmatched: string[];
  key_points: KeyPointSummary[];
}

export interface KeypointsView {
  job_id: string;
  version: number;
  groups: GroupView[];
}

export interface DrilldownItem {
  id: string;
  kind: "comment" | "candidate";
  score: number;
  text: string;
}

export interface DrilldownPage {
  job_id: string;
  version: number;
  kp_id: string;
  page: number;
  size: number;
  total: number;
  items: DrilldownItem[];
}

export interface ReviseResponse {
  revision_id: string;
  pending_revisions: number;
}

export interface AddResponse extends ReviseResponse {
  kp_id: string;
}

export interface RematchResponse {
  version: number;
}
