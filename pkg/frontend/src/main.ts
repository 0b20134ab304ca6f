import { TriageApi } from "./api.js";
import { wire } from "./render.js";
import { TriageController } from "./state.js";

const root = document.getElementById("app");
if (root) {
  const controller = new TriageController(new TriageApi());
  wire(root, controller);
  void controller.refreshProgress();
  void controller.viewNext();
  const POLL_MS = 5000;
  setInterval(() => void controller.refreshProgress(), POLL_MS);
}
