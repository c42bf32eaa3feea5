import { main } from "./app";

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app container");
}
main(root);
