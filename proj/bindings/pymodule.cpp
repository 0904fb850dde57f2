// Python surface for the lab: plan handling, the regime runners, the CTC /
// edit-distance primitives, and provenance checks. Heavy lifting stays in C++.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mergelab/ctc.hpp"
#include "mergelab/eval.hpp"
#include "mergelab/harness.hpp"
#include "mergelab/plan.hpp"

#include "json.hpp"

namespace py = pybind11;
using namespace mergelab;
using nlohmann::json;

namespace {

ExperimentPlan plan_from_json_str(const std::string& plan_json) {
    return parse_plan(json::parse(plan_json));
}

std::string run_regime_py(const std::string& plan_json, const std::string& regime,
                          const std::string& out_dir, int workers) {
    ExperimentPlan plan = plan_from_json_str(plan_json);
    Lab lab(plan, workers);
    Report r;
    if (regime == "baseline_grid") r = run_baseline_grid(lab, workers);
    else if (regime == "merge_variants") r = run_merge_variants(lab, workers);
    else if (regime == "transfer") r = run_transfer(lab, workers);
    else if (regime == "tk_sweep") r = run_tk_sweep(lab, workers);
    else if (regime == "subsample_sweep") r = run_subsample_sweep(lab, workers);
    else if (regime == "leave_one_out") r = run_leave_one_out(lab, workers);
    else throw PlanError("unknown regime: " + regime);
    if (!out_dir.empty()) save_report(r, out_dir + "/" + r.table);
    return report_csv(r);
}

LogitsSequence logits_from(const std::vector<std::vector<double>>& rows) {
    LogitsSequence l;
    l.frames = static_cast<int>(rows.size());
    l.num_classes = rows.empty() ? 0 : static_cast<int>(rows.front().size());
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != l.num_classes)
            throw std::invalid_argument("ragged logits");
        l.data.insert(l.data.end(), row.begin(), row.end());
    }
    return l;
}

} // namespace

PYBIND11_MODULE(_mergelab, m) {
    m.doc() = "distributed model-merging lab on synthetic glyph sequences";

    py::register_exception<PlanError>(m, "PlanError");
    py::register_exception<ProvenanceError>(m, "ProvenanceError");

    m.def("default_toy_plan", [] { return plan_to_json(default_toy_plan()).dump(2); },
          "built-in desk-scale plan as a JSON string");
    m.def("plan_digest", [](const std::string& plan_json) {
        return plan_digest(plan_from_json_str(plan_json));
    });
    m.def("validate_plan", [](const std::string& plan_json) {
        plan_from_json_str(plan_json).validate();
    });

    m.def("run_regime", &run_regime_py, py::arg("plan_json"), py::arg("regime"),
          py::arg("out_dir") = "", py::arg("workers") = 1,
          "run one regime; writes report files when out_dir is set; returns the CSV",
          py::call_guard<py::gil_scoped_release>());
    m.def("verify_provenance", [](const std::string& dir) { verify_provenance(dir); });

    m.def("ctc_loss", [](const std::vector<std::vector<double>>& logits,
                         const std::vector<int>& label) {
        CtcResult r = ctc_loss(logits_from(logits), label);
        return py::make_tuple(r.loss, r.grad_logits);
    });
    m.def("greedy_decode", [](const std::vector<std::vector<double>>& logits) {
        return greedy_decode(logits_from(logits));
    });
    m.def("levenshtein", [](const std::vector<int>& a, const std::vector<int>& b) {
        return levenshtein(a, b);
    });
}
