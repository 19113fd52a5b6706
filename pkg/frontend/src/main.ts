import { ApiClient } from "./api.js";
import { startApp } from "./app.js";

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}
startApp(root, new ApiClient(""));
