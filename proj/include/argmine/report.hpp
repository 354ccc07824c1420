#pragma once

// Markdown rendering of cross-validation reports and the full results matrix
// (the twenty-row model/feature grid with significance marks against the
// logistic-regression-on-wLDA row).

#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "argmine/eval.hpp"
#include "argmine/harness.hpp"
#include "argmine/models.hpp"

namespace argmine {

namespace report_detail {

inline std::string fmt(double v, const char* spec = "%.3f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline std::string metric_cells(const EvaluationReport& r, const std::string& kappa_mark = "") {
  return fmt(r.kappa) + kappa_mark + " | " + fmt(r.macro_precision) + " | " + fmt(r.macro_recall) + " | " +
         fmt(r.macro_f) + " | " + fmt(r.f_evidence()) + " | " + fmt(r.f_warrant()) + " | " + fmt(r.f_claim());
}

}  // namespace report_detail

inline constexpr const char* kMetricHeader = "Kappa | Precision | Recall | F-score | F_e | F_w | F_c";

/// report.md for one experiment.
inline std::string render_markdown(const CvReport& r) {
  using report_detail::fmt;
  std::ostringstream out;
  out << "# " << r.name << "\n\n";
  out << "Transcript-wise cross-validation, " << r.folds.size() << " folds, " << r.predictions.size()
      << " test moves. Fold-mean metrics (first row) and pooled metrics (second row).\n\n";
  out << "| View | " << kMetricHeader << " |\n|---|---|---|---|---|---|---|---|\n";
  out << "| fold mean | " << report_detail::metric_cells(r.aggregate) << " |\n";
  out << "| pooled | " << report_detail::metric_cells(r.pooled) << " |\n\n";
  if (r.aggregate.spec_kappa)
    out << "Specificity head, quadratic-weighted kappa (fold mean): " << fmt(*r.aggregate.spec_kappa) << "\n\n";
  out << "Leakage audit: " << r.leakage_violations << " violations.\n\n";
  out << "## Pooled confusion matrix (rows gold, columns predicted)\n\n| | claim | evidence | warrant |\n"
      << "|---|---|---|---|\n";
  for (std::size_t i = 0; i < 3; ++i) {
    out << "| " << to_string(kArgComponents[i]);
    for (std::size_t j = 0; j < 3; ++j) out << " | " << r.pooled_confusion(i, j);
    out << " |\n";
  }
  out << "\n## Folds\n\n| Fold | n | " << kMetricHeader << " | Degenerate kappa |\n"
      << "|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& f : r.folds)
    out << "| " << f.id << " | " << f.test_moves << " | " << report_detail::metric_cells(f.metrics) << " | "
        << (f.metrics.kappa_degenerate ? "yes" : "") << " |\n";
  return out.str();
}

/// Inverse of to_json(EvaluationReport).
inline EvaluationReport evaluation_from_json(const nlohmann::json& j) {
  EvaluationReport r;
  r.kappa = j.at("kappa").get<double>();
  r.kappa_degenerate = j.at("kappa_degenerate").get<bool>();
  r.macro_precision = j.at("precision").get<double>();
  r.macro_recall = j.at("recall").get<double>();
  r.macro_f = j.at("f_score").get<double>();
  r.per_class_f[index_of(ArgComponent::Evidence)] = j.at("f_e").get<double>();
  r.per_class_f[index_of(ArgComponent::Warrant)] = j.at("f_w").get<double>();
  r.per_class_f[index_of(ArgComponent::Claim)] = j.at("f_c").get<double>();
  for (auto a : kArgComponents) r.support[index_of(a)] = j.at("support").at(std::string(to_string(a))).get<std::uint64_t>();
  r.n = j.at("n").get<std::uint64_t>();
  if (j.contains("spec_quadratic_kappa")) r.spec_kappa = j.at("spec_quadratic_kappa").get<double>();
  return r;
}

inline ConfusionMatrix confusion_from_json(const nlohmann::json& j) {
  ConfusionMatrix cm(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    for (std::size_t k = 0; k < j.at(i).size(); ++k) cm.add(i, k, j.at(i).at(k).get<std::uint64_t>());
  return cm;
}

/// Reads back the parts of report.json that render_markdown() uses.
inline CvReport cv_report_from_json(const nlohmann::json& j) {
  try {
    CvReport r;
    r.name = j.at("name").get<std::string>();
    r.config = nlohmann::ordered_json::parse(j.at("config").dump());
    r.aggregate = evaluation_from_json(j.at("aggregate"));
    r.pooled = evaluation_from_json(j.at("pooled"));
    r.pooled_confusion = confusion_from_json(j.at("pooled_confusion"));
    r.leakage_violations = j.at("leakage_violations").get<std::size_t>();
    for (const auto& jf : j.at("folds")) {
      FoldReport f;
      f.id = jf.at("id").get<std::string>();
      f.test_transcripts = jf.at("test_transcripts").get<std::vector<std::string>>();
      f.metrics = evaluation_from_json(jf.at("metrics"));
      f.confusion = confusion_from_json(jf.at("confusion"));
      f.test_moves = jf.at("test_moves").get<std::size_t>();
      r.folds.push_back(std::move(f));
    }
    for (const auto& jp : j.at("predictions")) {
      PredictionRecord p;
      p.key = jp.at("move").get<std::string>();
      p.fold = jp.at("fold").get<std::string>();
      p.gold = *parse_arg(jp.at("gold").get<std::string>());
      p.predicted = *parse_arg(jp.at("predicted").get<std::string>());
      p.probs = jp.at("probs").get<std::array<double, 3>>();
      r.predictions.push_back(std::move(p));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  } catch (const std::bad_optional_access&) {
    throw ParseError("report: unknown label");
  }
}

// ---------------------------------------------------------------------------
// the results matrix

struct MatrixRow {
  int number = 0;
  std::string group;            // section, e.g. "char" or "multi-task word"
  std::string label;            // model / features
  std::optional<ModelSpec> spec;  // empty: row not runnable here
  std::string note;
};

inline constexpr int kComparisonRow = 3;

/// The twenty rows in results-table order. Row 2 (a pre-trained essay
/// system) has no model here and stays as a not-available placeholder.
inline std::vector<MatrixRow> matrix_rows() {
  std::vector<MatrixRow> rows;
  auto spec = [](Family f, Modality m, bool feats, bool mt) {
    ModelSpec s;
    s.family = f;
    s.modality = m;
    s.wlda = s.dialogue = feats;
    s.multitask = mt;
    return s;
  };
  ModelSpec lr_wlda = spec(Family::LogReg, Modality::None, false, false);
  lr_wlda.wlda = true;
  rows.push_back({1, "baseline", "Majority baseline", spec(Family::Majority, Modality::None, false, false), ""});
  rows.push_back({2, "baseline", "Pre-trained wLDA", std::nullopt,
                  "not available: needs the original pre-trained essay model"});
  rows.push_back({3, "baseline", "Logistic Regression (wLDA features)", lr_wlda, ""});
  rows.push_back({4, "baseline", "Logistic Regression (wLDA features + online dialogue)",
                  spec(Family::LogReg, Modality::None, true, false), ""});
  int n = 5;
  for (bool mt : {false, true}) {
    for (Modality m : {Modality::Char, Modality::Word}) {
      const std::string group = std::string(mt ? "multi-task " : "") + (m == Modality::Char ? "char" : "word");
      for (Family f : {Family::LSTM, Family::CNN}) {
        const std::string base = f == Family::LSTM ? "LSTM" : "CNN";
        rows.push_back({n++, group, base, spec(f, m, false, mt), ""});
        rows.push_back({n++, group, base + " + wLDA + online dialogue", spec(f, m, true, mt), ""});
      }
    }
  }
  return rows;
}

struct MatrixConfig {
  Experiment base;  // everything except the model
  std::map<Family, nlohmann::json> hyperparams;  // per-family overrides
  std::size_t permutation_iterations = 10000;
};

inline MatrixConfig matrix_config_from_json(const nlohmann::json& j) {
  json_detail::reject_unknown(j, "",
                              {"name", "seed", "oversample", "class_weights", "features", "embeddings", "validation",
                               "cv", "hyperparams", "permutation_iterations"});
  nlohmann::json e = j;
  e.erase("hyperparams");
  e.erase("permutation_iterations");
  e["model"] = {{"family", "majority"}};
  MatrixConfig c;
  c.base = experiment_from_json(e);
  if (!j.contains("name")) c.base.name = "matrix";
  if (j.contains("hyperparams")) {
    const auto& h = j.at("hyperparams");
    json_detail::reject_unknown(h, "hyperparams", {"logreg", "cnn", "lstm"});
    for (const auto& [k, v] : h.items()) {
      const Family f = *parse_family(k);
      Hyperparams probe;
      apply_hyperparams(probe, v, "hyperparams." + k);
      c.hyperparams[f] = v;
    }
  }
  if (j.contains("permutation_iterations")) {
    c.permutation_iterations = json_detail::get_as<std::size_t>(j.at("permutation_iterations"),
                                                               "permutation_iterations");
    if (c.permutation_iterations == 0) throw ConfigError("permutation_iterations", "must be positive");
  }
  return c;
}

/// The experiment for one matrix row.
inline Experiment matrix_experiment(const MatrixConfig& cfg, const MatrixRow& row) {
  Experiment e = cfg.base;
  e.model = *row.spec;
  if (auto it = cfg.hyperparams.find(e.model.family); it != cfg.hyperparams.end())
    apply_hyperparams(e.model.hp, it->second, "hyperparams." + std::string(to_string(e.model.family)));
  e.name = "row " + std::to_string(row.number) + ": " + row.group + " " + row.label;
  e.validate();
  return e;
}

struct MatrixResult {
  MatrixRow row;
  std::optional<CvReport> report;
  std::string error;              // failure message when the run failed
  std::optional<double> p_value;  // move-level permutation test against row 3
};

/// Runs every runnable row; a failing row is recorded and the rest continue.
inline std::vector<MatrixResult> run_matrix(const Corpus& corpus, const ProcessedCorpus& pc, const MatrixConfig& cfg,
                                            const RunOptions& opt = {},
                                            const std::function<void(const MatrixResult&)>& on_row = {}) {
  std::vector<MatrixResult> out;
  for (const auto& row : matrix_rows()) {
    MatrixResult res{row, std::nullopt, row.spec ? "" : row.note, std::nullopt};
    if (row.spec) {
      try {
        res.report = run_experiment(corpus, pc, matrix_experiment(cfg, row), opt);
      } catch (const std::exception& e) {
        res.error = e.what();
      }
    }
    out.push_back(std::move(res));
    if (on_row) on_row(out.back());
  }
  const MatrixResult* base = nullptr;
  for (const auto& r : out)
    if (r.row.number == kComparisonRow && r.report) base = &r;
  if (base) {
    const auto b = base->report->correctness();
    for (auto& r : out) {
      if (!r.report || r.row.number == kComparisonRow) continue;
      const auto a = r.report->correctness();
      r.p_value = permutation_test(std::span<const int>(a), std::span<const int>(b), cfg.permutation_iterations,
                                   derive_seed(cfg.base.seed, "permutation-row-" + std::to_string(r.row.number)));
    }
  }
  return out;
}

/// The combined markdown table: one line per row in results-table order.
/// Significance marks on Kappa: ⋆ p < 0.1, † p < 0.05, ‡ p < 0.01 against row 3.
inline std::string render_matrix_markdown(const std::vector<MatrixResult>& results) {
  using report_detail::fmt;
  std::ostringstream out;
  out << "| Row | Group | Models / Features | " << kMetricHeader << " | p vs row 3 |\n"
      << "|---|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : results) {
    out << "| " << r.row.number << " | " << r.row.group << " | " << r.row.label << " | ";
    if (r.report) {
      const std::string mark = r.p_value ? significance_mark(*r.p_value) : "";
      out << report_detail::metric_cells(r.report->aggregate, mark) << " | "
          << (r.p_value ? fmt(*r.p_value, "%.4f") : std::string("(baseline)")) << " |\n";
    } else if (!r.row.spec) {
      out << "N/A | N/A | N/A | N/A | N/A | N/A | N/A | N/A |\n";
    } else {
      out << "failed | failed | failed | failed | failed | failed | failed | failed |\n";
    }
  }
  out << "\nMarks on Kappa: ⋆ p < 0.1, † p < 0.05, ‡ p < 0.01 (paired sign-flip permutation test on per-move "
         "correctness against row 3).\n";
  bool any_note = false;
  for (const auto& r : results) {
    if (r.error.empty()) continue;
    if (!any_note) out << "\n";
    any_note = true;
    out << "- Row " << r.row.number << ": " << r.error << "\n";
  }
  return out.str();
}

inline nlohmann::ordered_json to_json(const std::vector<MatrixResult>& results) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    nlohmann::ordered_json j;
    j["row"] = r.row.number;
    j["group"] = r.row.group;
    j["label"] = r.row.label;
    if (r.report) {
      j["name"] = r.report->name;
      j["aggregate"] = to_json(r.report->aggregate);
      j["pooled"] = to_json(r.report->pooled);
      j["leakage_violations"] = r.report->leakage_violations;
    }
    j["p_vs_row3"] = r.p_value ? nlohmann::ordered_json(*r.p_value) : nlohmann::ordered_json(nullptr);
    if (!r.error.empty()) j["error"] = r.error;
    rows.push_back(j);
  }
  return rows;
}

}  // namespace argmine
