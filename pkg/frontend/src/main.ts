import { HttpServiceClient } from "./api";
import { StudioController } from "./controller";
import { Panels, Toasts } from "./panels";
import { Viewport } from "./viewport";

const panelsRoot = document.getElementById("panels")!;
const viewportRoot = document.getElementById("viewport")!;
const toastsRoot = document.getElementById("toasts")!;

const viewport = new Viewport(viewportRoot);
const toasts = new Toasts(toastsRoot);

const controller = new StudioController(new HttpServiceClient(""), {
  onGeometry: (frame) => viewport.showFrame(frame),
  onTopology: (layout) => viewport.setTopology(layout),
  onState: (state) => panels.update(state),
  onToast: (message) => toasts.show(message),
});
const panels = new Panels(panelsRoot, controller);

controller.init().catch((error) => toasts.show(String(error)));

function loop() {
  controller.tick(performance.now() / 1000);
  viewport.render();
  requestAnimationFrame(loop);
}
requestAnimationFrame(loop);
