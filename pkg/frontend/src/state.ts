import type { ConsoleApi } from "./api.js";
import type { DrilldownPage, JobView, KeypointsView } from "./types.js";

export interface StagedEdit {
  kind: "rename" | "delete" | "add";
  kpId: string;
  text?: string;
}

/**
 * Console session for one job. Versions are immutable on the server, so
 * every loaded view is cached by version number and never refetched;
 * rematch appends a version and moves the cursor forward.
 */
export class ConsoleState {
  private job: JobView | null = null;
  private version = 0;
  private readonly versionCache = new Map<number, KeypointsView>();
  private readonly staged: StagedEdit[] = [];
  private drilldown: DrilldownPage | null = null;

  constructor(
    private readonly api: ConsoleApi,
    readonly jobId: string,
  ) {}

  get currentJob(): JobView {
    if (!this.job) throw new Error("job not loaded");
    return this.job;
  }

  get currentVersion(): number {
    return this.version;
  }

  get currentDrilldown(): DrilldownPage | null {
    return this.drilldown;
  }

  get stagedEdits(): readonly StagedEdit[] {
    return this.staged;
  }

  get pendingRevisions(): number {
    return this.currentJob.pending_revisions;
  }

  cachedView(version: number): KeypointsView | undefined {
    return this.versionCache.get(version);
  }

  async loadJob(): Promise<JobView> {
    this.job = await this.api.getJob(this.jobId);
    return this.job;
  }

  async openVersion(version: number): Promise<KeypointsView> {
    const cached = this.versionCache.get(version);
    if (cached) {
      this.version = version;
      this.drilldown = null;
      return cached;
    }
    const view = await this.api.getKeypoints(this.jobId, version);
    this.versionCache.set(version, view);
    this.version = version;
    this.drilldown = null;
    return view;
  }

  async openLatest(): Promise<KeypointsView> {
    return this.openVersion(this.currentJob.versions - 1);
  }

  async selectKeyPoint(kpId: string, page = 1, size = 10): Promise<DrilldownPage> {
    this.drilldown = await this.api.getDrilldown(this.jobId, this.version, kpId, page, size);
    return this.drilldown;
  }

  async stageRename(kpId: string, text: string): Promise<void> {
    const resp = await this.api.renameKeyPoint(this.jobId, kpId, text);
    this.recordEdit({ kind: "rename", kpId, text }, resp.pending_revisions);
  }

  async stageDelete(kpId: string): Promise<void> {
    const resp = await this.api.deleteKeyPoint(this.jobId, kpId);
    this.recordEdit({ kind: "delete", kpId }, resp.pending_revisions);
  }

  async stageAdd(text: string, topic?: string): Promise<string> {
    const resp = await this.api.addKeyPoint(this.jobId, text, topic);
    this.recordEdit({ kind: "add", kpId: resp.kp_id, text }, resp.pending_revisions);
    return resp.kp_id;
  }

  private recordEdit(edit: StagedEdit, pending: number): void {
    // A later draft for the same key point replaces the earlier one,
    // mirroring the server's revision semantics.
    const existing = this.staged.findIndex((e) => e.kpId === edit.kpId);
    if (existing >= 0) {
      this.staged.splice(existing, 1);
    }
    this.staged.push(edit);
    if (this.job) {
      this.job = { ...this.job, pending_revisions: pending };
    }
  }

  /** Apply staged edits: the server writes version n+1 and the console moves to it. */
  async applyRematch(): Promise<KeypointsView> {
    const { version } = await this.api.rematch(this.jobId);
    this.staged.length = 0;
    await this.loadJob();
    return this.openVersion(version);
  }
}
