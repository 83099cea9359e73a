import init, { Scenario, classifyStrategy } from "./pkg/debriefkit_wasm_demo.js";

const $ = (id) => document.getElementById(id);
let scenario = null;

function generate() {
  if (scenario) scenario.free();
  scenario = new Scenario(Number($("seed").value) >>> 0);
  $("summary").textContent = JSON.stringify(JSON.parse(scenario.summary), null, 2);
  draw();
}

function draw() {
  if (!scenario) return;
  $("radius-value").textContent = $("radius").value;
  try {
    $("view").innerHTML = scenario.render($("viz").value, $("phase").value, Number($("radius").value));
    $("view-error").textContent = "";
  } catch (e) {
    $("view").innerHTML = "";
    $("view-error").textContent = String(e);
  }
}

function classify() {
  try {
    $("label").textContent = classifyStrategy($("sequence").value);
  } catch (e) {
    $("label").textContent = String(e);
  }
}

await init();
$("generate").addEventListener("click", generate);
for (const id of ["viz", "phase", "radius"]) $(id).addEventListener("input", draw);
$("classify").addEventListener("click", classify);
generate();
classify();
