import init, { check_action, run_scenario, evaluate_expression, taxi_norms, taxi_scenario } from "./pkg/normsim_wasm.js";

const $ = (id) => document.getElementById(id);

function show(el, fn) {
  el.classList.remove("err");
  try {
    el.textContent = fn();
  } catch (e) {
    el.classList.add("err");
    el.textContent = String(e.message ?? e);
  }
}

function runTaxi() {
  const summary = $("run-summary");
  const log = $("run-log");
  summary.textContent = "";
  show(log, () => {
    const seed = BigInt($("seed").value || 0);
    const ticks = BigInt($("ticks").value || 1);
    const r = JSON.parse(run_scenario(taxi_scenario(), seed, ticks));
    const rows = r.drivers
      .map((d) => `<tr><td style="text-align:left">${d.id}</td><td>${d.capacity}</td><td>${d.trips}</td><td>${d.utility}</td></tr>`)
      .join("");
    const violations = Object.entries(r.violations).map(([n, c]) => `${n}: ${c}`).join(", ") || "none";
    summary.innerHTML =
      `<p>${r.groups_arrived} groups arrived, ${r.groups_lost} walked away. Violations: ${violations}</p>` +
      `<table><tr><th>driver</th><th>capacity</th><th>trips</th><th>utility</th></tr>${rows}</table>`;
    // only the decisions worth reading
    return r.events
      .filter((e) => e.status !== "NOT_REGULATED")
      .map((e) => JSON.stringify(e))
      .join("\n");
  });
}

await init();
$("norms").value = taxi_norms();
$("check").onclick = () =>
  show($("check-out"), () =>
    JSON.stringify(
      JSON.parse(check_action($("norms").value, $("action").value, $("domain").value, $("roles").value, $("state").value)),
      null,
      2,
    ),
  );
$("run").onclick = runTaxi;
$("eval").onclick = () =>
  show($("eval-out"), () => {
    const r = JSON.parse(evaluate_expression($("expr").value, $("expr-state").value));
    return `${r.printed}\n=> ${r.value} (${r.type})`;
  });
