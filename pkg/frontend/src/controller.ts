/**
 * Panel-to-service bindings. The controller owns no geometry math: every
 * control change issues the matching mutation and re-fetches the binary
 * payload, which is handed verbatim to the renderer. Stale payloads
 * (revision below the last applied mutation) are discarded; slider and
 * scrub updates are last-writer-wins; playback drops frames rather than
 * queueing them.
 */

import { ApiError, LayoutDoc, ServiceClient, SessionInfo, AssetInfo } from "./api";
import { GeometryFrame, parseGeometry } from "./payload";
import { Playback } from "./player";
import { RevisionGate } from "./revision";

export interface ControllerEvents {
  onGeometry(frame: GeometryFrame): void;
  onTopology(layout: LayoutDoc): void;
  onState(state: StudioState): void;
  onToast(message: string): void;
}

export interface StudioState {
  session: SessionInfo | null;
  assets: AssetInfo[];
  weights: number[];
  garments: Set<string>;
  motion: { assetId: string; frameCount: number; frameTime: number } | null;
  frame: number;
  playing: boolean;
}

export class StudioController {
  readonly gate = new RevisionGate();
  private readonly api: ServiceClient;
  private readonly events: ControllerEvents;
  private sessionId = "";
  private state: StudioState = {
    session: null,
    assets: [],
    weights: [],
    garments: new Set(),
    motion: null,
    frame: 0,
    playing: false,
  };
  private playback: Playback | null = null;

  private shapeSyncing = false;
  private shapeDirty = false;
  private frameSyncing = false;
  private pendingFrame: number | null = null;
  private geometryInFlight = false;
  private geometryDirty = false;
  private layoutRevision = -1;
  geometryFetchCount = 0;

  constructor(api: ServiceClient, events: ControllerEvents) {
    this.api = api;
    this.events = events;
  }

  get current(): StudioState {
    return this.state;
  }

  async init(): Promise<void> {
    this.state.assets = await this.api.listAssets();
    const session = await this.api.createSession();
    this.sessionId = session.id;
    this.state.session = session;
    this.state.weights = [...session.weights];
    this.state.garments = new Set(session.garments);
    this.state.frame = session.frame;
    this.gate.applied(session.revision);
    this.events.onState(this.state);
    await this.refreshTopology();
    await this.refreshGeometry();
  }

  // -- shape panel ---------------------------------------------------------

  setWeight(index: number, value: number): void {
    this.state.weights[index] = value;
    this.events.onState(this.state);
    void this.syncShape();
  }

  private async syncShape(): Promise<void> {
    if (this.shapeSyncing) {
      this.shapeDirty = true;
      return;
    }
    this.shapeSyncing = true;
    try {
      do {
        this.shapeDirty = false;
        const desired = [...this.state.weights];
        try {
          const response = await this.api.setShape(this.sessionId, desired);
          this.gate.applied(response.revision);
          if (!this.shapeDirty) {
            // show the server's clamped values unless the user moved on
            this.state.weights = [...response.applied];
            this.events.onState(this.state);
          }
        } catch (error) {
          this.toastError(error);
          return;
        }
      } while (this.shapeDirty);
    } finally {
      this.shapeSyncing = false;
    }
    await this.refreshGeometry();
  }

  // -- dress panel -----------------------------------------------------------

  async toggleGarment(garmentId: string): Promise<void> {
    const attached = this.state.garments.has(garmentId);
    try {
      const response = attached
        ? await this.api.detachGarment(this.sessionId, garmentId)
        : await this.api.attachGarment(this.sessionId, garmentId);
      this.gate.applied(response.revision);
      if (attached) {
        this.state.garments.delete(garmentId);
      } else {
        this.state.garments.add(garmentId);
      }
      this.events.onState(this.state);
    } catch (error) {
      this.toastError(error);
      return;
    }
    await this.refreshTopology();
    await this.refreshGeometry();
  }

  // -- motion panel ------------------------------------------------------------

  async loadMotion(assetId: string): Promise<void> {
    try {
      const response = await this.api.loadMotion(this.sessionId, assetId);
      this.gate.applied(response.revision);
      this.state.motion = {
        assetId,
        frameCount: response.frame_count,
        frameTime: response.frame_time,
      };
      this.state.frame = 0;
      this.playback = new Playback(response.frame_count, response.frame_time);
      this.state.playing = false;
      for (const warning of response.warnings) {
        this.events.onToast(warning);
      }
      this.events.onState(this.state);
    } catch (error) {
      this.toastError(error);
      return;
    }
    await this.refreshGeometry();
  }

  scrubTo(frame: number): void {
    if (!this.state.motion) {
      return;
    }
    const clamped = Math.max(0, Math.min(this.state.motion.frameCount - 1, Math.round(frame)));
    this.state.frame = clamped;
    this.events.onState(this.state);
    void this.syncFrame(clamped);
  }

  private async syncFrame(frame: number): Promise<void> {
    if (this.frameSyncing) {
      this.pendingFrame = frame;
      return;
    }
    this.frameSyncing = true;
    try {
      let target: number | null = frame;
      while (target !== null) {
        this.pendingFrame = null;
        try {
          const response = await this.api.setFrame(this.sessionId, target);
          this.gate.applied(response.revision);
        } catch (error) {
          this.toastError(error);
          return;
        }
        target = this.pendingFrame;
      }
    } finally {
      this.frameSyncing = false;
    }
    await this.refreshGeometry();
  }

  // -- playback -------------------------------------------------------------

  togglePlay(now: number): void {
    if (!this.state.motion || !this.playback) {
      return;
    }
    if (this.state.playing) {
      this.playback.stop();
      this.state.playing = false;
    } else {
      this.playback.start(now, this.state.frame);
      this.state.playing = true;
    }
    this.events.onState(this.state);
  }

  /**
   * Animation tick. When the previous frame mutation or fetch is still in
   * flight the tick does nothing, so a slow service drops frames instead
   * of building a queue.
   */
  tick(now: number): void {
    if (!this.state.playing || !this.playback || !this.state.motion) {
      return;
    }
    const target = this.playback.frameAt(now);
    if (target === this.state.frame) {
      return;
    }
    if (this.frameSyncing || this.geometryInFlight) {
      return; // drop, never queue
    }
    this.state.frame = target;
    this.events.onState(this.state);
    void this.syncFrame(target);
  }

  // -- geometry -----------------------------------------------------------------

  private async refreshTopology(): Promise<void> {
    try {
      const layout = await this.api.fetchLayout(this.sessionId);
      if (layout.revision < this.layoutRevision) {
        return; // a newer section set is already shown
      }
      this.layoutRevision = layout.revision;
      this.events.onTopology(layout);
    } catch (error) {
      this.toastError(error);
    }
  }

  async refreshGeometry(): Promise<void> {
    if (this.geometryInFlight) {
      this.geometryDirty = true;
      return;
    }
    this.geometryInFlight = true;
    try {
      do {
        this.geometryDirty = false;
        try {
          const bytes = await this.api.fetchGeometry(this.sessionId);
          this.geometryFetchCount += 1;
          const frame = parseGeometry(bytes);
          if (this.gate.admit(frame.revision)) {
            this.events.onGeometry(frame);
          } else if (!this.geometryDirty) {
            this.geometryDirty = true; // a newer revision exists; refetch
          }
        } catch (error) {
          this.toastError(error);
          return;
        }
      } while (this.geometryDirty);
    } finally {
      this.geometryInFlight = false;
    }
  }

  private toastError(error: unknown): void {
    if (error instanceof ApiError) {
      this.events.onToast(error.message);
    } else {
      this.events.onToast(String(error));
    }
  }
}
