import { AuditApi } from "./api.js";
import { ExplorerSession } from "./state.js";
import { ExplorerView } from "./ui.js";

const params = new URLSearchParams(window.location.search);
const serviceUrl = params.get("service") ?? "http://127.0.0.1:8000";

const session = new ExplorerSession(new AuditApi(serviceUrl));
const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}
new ExplorerView(root, session).start();
