/** DOM construction for the three studio panels. */

import { StudioController, StudioState } from "./controller";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export class Panels {
  private readonly controller: StudioController;
  private readonly root: HTMLElement;
  private sliders: HTMLInputElement[] = [];
  private sliderValues: HTMLElement[] = [];
  private garmentButtons = new Map<string, HTMLButtonElement>();
  private frameSlider: HTMLInputElement | null = null;
  private frameLabel: HTMLElement | null = null;
  private playButton: HTMLButtonElement | null = null;
  private rateLabel: HTMLElement | null = null;
  private built = false;

  constructor(root: HTMLElement, controller: StudioController) {
    this.root = root;
    this.controller = controller;
  }

  update(state: StudioState): void {
    if (!this.built && state.session) {
      this.build(state);
      this.built = true;
    }
    this.refresh(state);
  }

  private build(state: StudioState): void {
    const session = state.session!;
    const shape = el("section", "panel");
    shape.appendChild(el("h2", undefined, "Shape"));
    session.attribute_names.forEach((name, i) => {
      const [lo, hi] = session.weight_bounds[i];
      const row = el("div", "slider-row");
      row.appendChild(el("label", undefined, name));
      const input = el("input") as HTMLInputElement;
      input.type = "range";
      input.min = String(lo);
      input.max = String(hi);
      input.step = "0.01";
      input.value = String(state.weights[i] ?? 0);
      input.addEventListener("input", () => {
        this.controller.setWeight(i, Number(input.value));
      });
      const value = el("span", "slider-value", Number(input.value).toFixed(2));
      row.appendChild(input);
      row.appendChild(value);
      shape.appendChild(row);
      this.sliders.push(input);
      this.sliderValues.push(value);
    });
    this.root.appendChild(shape);

    const dress = el("section", "panel");
    dress.appendChild(el("h2", undefined, "Dress"));
    const grid = el("div", "garment-grid");
    for (const asset of state.assets.filter((a) => a.kind === "garment")) {
      const button = el("button", "garment", asset.name) as HTMLButtonElement;
      button.addEventListener("click", () => {
        void this.controller.toggleGarment(asset.id);
      });
      this.garmentButtons.set(asset.id, button);
      grid.appendChild(button);
    }
    dress.appendChild(grid);
    this.root.appendChild(dress);

    const motion = el("section", "panel");
    motion.appendChild(el("h2", undefined, "Motion"));
    const chooser = el("div", "motion-row");
    const select = el("select") as HTMLSelectElement;
    for (const asset of state.assets.filter((a) => a.kind === "motion")) {
      const option = el("option", undefined, asset.name) as HTMLOptionElement;
      option.value = asset.id;
      select.appendChild(option);
    }
    const load = el("button", undefined, "Load") as HTMLButtonElement;
    load.addEventListener("click", () => {
      void this.controller.loadMotion(select.value);
    });
    chooser.appendChild(select);
    chooser.appendChild(load);
    motion.appendChild(chooser);

    const timeline = el("div", "motion-row");
    const frame = el("input") as HTMLInputElement;
    frame.type = "range";
    frame.min = "0";
    frame.max = "0";
    frame.step = "1";
    frame.disabled = true;
    frame.addEventListener("input", () => {
      this.controller.scrubTo(Number(frame.value));
    });
    this.frameSlider = frame;
    const play = el("button", undefined, "Play") as HTMLButtonElement;
    play.disabled = true;
    play.addEventListener("click", () => {
      this.controller.togglePlay(performance.now() / 1000);
    });
    this.playButton = play;
    timeline.appendChild(play);
    timeline.appendChild(frame);
    motion.appendChild(timeline);
    const status = el("div", "motion-status");
    this.frameLabel = el("span", undefined, "no clip");
    this.rateLabel = el("span", undefined, "");
    status.appendChild(this.frameLabel);
    status.appendChild(this.rateLabel);
    motion.appendChild(status);
    this.root.appendChild(motion);
  }

  private refresh(state: StudioState): void {
    state.weights.forEach((w, i) => {
      const slider = this.sliders[i];
      if (slider && document.activeElement !== slider) {
        slider.value = String(w);
      }
      if (this.sliderValues[i]) {
        this.sliderValues[i].textContent = w.toFixed(2);
      }
    });
    for (const [gid, button] of this.garmentButtons) {
      button.classList.toggle("active", state.garments.has(gid));
    }
    if (this.frameSlider && this.playButton && this.frameLabel && this.rateLabel) {
      if (state.motion) {
        this.frameSlider.disabled = false;
        this.frameSlider.max = String(state.motion.frameCount - 1);
        if (document.activeElement !== this.frameSlider) {
          this.frameSlider.value = String(state.frame);
        }
        this.playButton.disabled = false;
        this.playButton.textContent = state.playing ? "Pause" : "Play";
        this.frameLabel.textContent = `frame ${state.frame} / ${state.motion.frameCount - 1}`;
        this.rateLabel.textContent = `${(1 / state.motion.frameTime).toFixed(1)} fps`;
      } else {
        this.frameLabel.textContent = "no clip";
        this.rateLabel.textContent = "";
      }
    }
  }
}

export class Toasts {
  private readonly root: HTMLElement;

  constructor(root: HTMLElement) {
    this.root = root;
  }

  show(message: string, ttlMs = 4000): void {
    const node = el("div", "toast", message);
    this.root.appendChild(node);
    setTimeout(() => node.remove(), ttlMs);
  }
}
