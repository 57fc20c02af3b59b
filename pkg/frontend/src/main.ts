import { ApiClient } from "./api.js";
import { ConsoleApp } from "./app.js";

const root = document.getElementById("app");
if (root) {
  const api = new ApiClient(window.location.origin);
  new ConsoleApp(root, api).start();
}
