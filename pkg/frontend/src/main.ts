import { mountConsole } from "./app.js";

mountConsole(document.getElementById("console")!);
