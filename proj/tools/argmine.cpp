// argmine: command-line front end.
//
//   argmine validate <corpus.jsonl>
//   argmine synth --out corpus.jsonl [--transcripts N] [--moves-mean M] [--signal S] [--seed N]
//   argmine run --config exp.json --corpus corpus.jsonl --out DIR [--seed N] [--threads N] [--ablate]
//   argmine ablate --config exp.json --corpus corpus.jsonl --out DIR [--groups g1,g2]
//   argmine matrix --corpus corpus.jsonl --out DIR [--config matrix.json]
//   argmine report report.json [--out report.md]
//   argmine features [--out FEATURES.md]
//
// Exit codes: 0 success, 1 runtime failure, 2 input or validation error.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "argmine/argmine.hpp"

#ifndef ARGMINE_VERSION
#define ARGMINE_VERSION "dev"
#endif

namespace fs = std::filesystem;
using namespace argmine;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitInput = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

nlohmann::json parse_json_file(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

/// manifest.json: what produced the directory. Timing lives here, not in report.json.
void write_manifest(const fs::path& dir, const std::string& command, const nlohmann::ordered_json& config,
                    const std::string& corpus_path, std::size_t threads, double seconds,
                    const std::vector<std::string>& files) {
  nlohmann::ordered_json m;
  m["command"] = command;
  m["code_version"] = ARGMINE_VERSION;
  m["config_hash"] = hex64(fnv1a64(config.dump()));
  m["config"] = config;
  if (!corpus_path.empty()) {
    m["corpus"] = corpus_path;
    m["corpus_hash"] = hex64(fnv1a64(read_file(corpus_path)));
  }
  m["threads"] = threads;
  m["seconds"] = seconds;
  m["files"] = files;
  write_file(dir / "manifest.json", m.dump(2) + "\n");
}

void write_report(const fs::path& dir, const CvReport& r, std::vector<std::string>& files, const std::string& prefix) {
  write_file(dir / "report.json", to_json(r).dump(2) + "\n");
  write_file(dir / "report.md", render_markdown(r));
  files.push_back(prefix + "report.json");
  files.push_back(prefix + "report.md");
}

std::string ablation_markdown(const std::map<std::string, CvReport>& runs) {
  std::ostringstream out;
  const double ref = runs.at("reference").aggregate.kappa;
  out << "| Run | " << kMetricHeader << " | Kappa change |\n|---|---|---|---|---|---|---|---|---|\n";
  auto line = [&](const std::string& key) {
    const auto& r = runs.at(key).aggregate;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%+.3f", r.kappa - ref);
    char cells[256];
    std::snprintf(cells, sizeof cells, "%.3f | %.3f | %.3f | %.3f | %.3f | %.3f | %.3f", r.kappa, r.macro_precision,
                  r.macro_recall, r.macro_f, r.f_evidence(), r.f_warrant(), r.f_claim());
    out << "| " << key << " | " << cells << " | " << buf << " |\n";
  };
  line("reference");
  for (const auto& [k, v] : runs)
    if (k != "reference") line(k);
  return out.str();
}

struct Common {
  std::string config, corpus, out;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
};

int cmd_validate(const std::string& path) {
  const Corpus c = load_corpus(path);
  std::cout << render_stats(corpus_stats(c));
  return 0;
}

struct SynthArgs {
  std::string out;
  std::size_t transcripts = 30;
  double moves_mean = 10.0;
  double signal = 1.0;
  std::uint64_t seed = 1;
  std::string mode = "keywords";
  bool full_counts = false;
  std::string embeddings;
};

int cmd_synth(const SynthArgs& a) {
  SynthConfig cfg;
  cfg.n_transcripts = a.transcripts;
  cfg.moves_per_transcript_mean = a.moves_mean;
  cfg.class_signal_strength = a.signal;
  cfg.seed = a.seed;
  if (a.mode == "keywords") cfg.mode = SignalMode::Keywords;
  else if (a.mode == "word-length") cfg.mode = SignalMode::WordLength;
  else throw ConfigError("--mode", "expected keywords or word-length");
  if (a.full_counts) cfg.arg_counts = std::array<std::size_t, 3>{1034, 655, 358};
  const Corpus c = generate_synthetic(cfg);
  save_corpus(a.out, c);
  if (!a.embeddings.empty()) {
    std::vector<std::string> vocab;
    for (const auto& t : c.transcripts)
      for (const auto& m : t.moves)
        for (auto& tok : tokenize(m.text)) vocab.push_back(tok);
    std::sort(vocab.begin(), vocab.end());
    vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
    Embeddings::hashed(vocab, derive_seed(a.seed, "embeddings")).save(a.embeddings);
  }
  std::cerr << "wrote " << c.transcripts.size() << " transcripts, " << c.num_moves() << " moves to " << a.out << "\n";
  return 0;
}

int cmd_run(const Common& o, bool ablate, const std::vector<std::string>& groups) {
  Experiment exp = load_experiment(o.config);
  if (o.seed) exp.seed = *o.seed;
  const Corpus corpus = load_corpus(o.corpus);
  const ProcessedCorpus pc = preprocess(corpus);
  RunOptions opt;
  opt.threads = o.threads;
  opt.on_fold_done = [](const std::string&) { std::cerr << "." << std::flush; };
  const fs::path dir(o.out);
  fs::create_directories(dir);
  std::vector<std::string> files;
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t threads = 1;
  if (ablate) {
    const auto names = groups.empty() ? all_feature_group_names() : groups;
    const auto runs = run_ablation(corpus, pc, exp, names, opt);
    for (const auto& [key, r] : runs) {
      const std::string sub = key == "reference" ? "reference" : key.substr(1);
      write_report(dir / "ablation" / sub, r, files, "ablation/" + sub + "/");
      threads = r.runtime.threads;
    }
    write_file(dir / "ablation.md", ablation_markdown(runs));
    files.push_back("ablation.md");
    write_report(dir, runs.at("reference"), files, "");
  } else {
    const CvReport r = run_experiment(corpus, pc, exp, opt);
    threads = r.runtime.threads;
    write_report(dir, r, files, "");
    std::printf("kappa %.4f  F %.4f  (%zu folds)\n", r.aggregate.kappa, r.aggregate.macro_f, r.folds.size());
  }
  std::cerr << "\n";
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(dir, ablate ? "ablate" : "run", to_json(exp), o.corpus, threads, secs, files);
  return 0;
}

int cmd_matrix(const Common& o) {
  MatrixConfig cfg = o.config.empty() ? matrix_config_from_json(nlohmann::json::object())
                                      : matrix_config_from_json(parse_json_file(o.config));
  if (o.seed) cfg.base.seed = *o.seed;
  const Corpus corpus = load_corpus(o.corpus);
  const ProcessedCorpus pc = preprocess(corpus);
  RunOptions opt;
  opt.threads = o.threads;
  const fs::path dir(o.out);
  fs::create_directories(dir);
  std::vector<std::string> files;
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = run_matrix(corpus, pc, cfg, opt, [](const MatrixResult& r) {
    std::cerr << "row " << r.row.number << (r.report ? " done" : r.row.spec ? " FAILED: " + r.error : " skipped")
              << "\n";
  });
  std::size_t threads = 1;
  for (const auto& r : results) {
    if (!r.report) continue;
    const std::string sub = "rows/row" + std::to_string(r.row.number);
    write_report(dir / sub, *r.report, files, sub + "/");
    threads = r.report->runtime.threads;
  }
  const std::string table = render_matrix_markdown(results);
  write_file(dir / "matrix.md", "# Results matrix\n\n" + table);
  write_file(dir / "matrix.json", to_json(results).dump(2) + "\n");
  files.push_back("matrix.md");
  files.push_back("matrix.json");
  std::cout << table;
  nlohmann::ordered_json config = to_json(cfg.base);
  config.erase("model");
  nlohmann::ordered_json hp = nlohmann::ordered_json::object();
  for (const auto& [f, v] : cfg.hyperparams) hp[std::string(to_string(f))] = nlohmann::ordered_json::parse(v.dump());
  config["hyperparams"] = hp;
  config["permutation_iterations"] = cfg.permutation_iterations;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(dir, "matrix", config, o.corpus, threads, secs, files);
  for (const auto& r : results)
    if (r.row.spec && !r.report) return kExitRuntime;
  return 0;
}

int cmd_report(const std::string& in, const std::string& out) {
  const CvReport r = cv_report_from_json(parse_json_file(in));
  const std::string md = render_markdown(r);
  if (out.empty()) std::cout << md;
  else write_file(out, md);
  return 0;
}

int cmd_features(const std::string& out) {
  const std::string md = render_feature_catalog();
  if (out.empty()) std::cout << md;
  else write_file(out, md);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"argmine: argument-component classification for discussion transcripts"};
  app.set_version_flag("--version", ARGMINE_VERSION);
  app.require_subcommand(1);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Load and validate a corpus, print its statistics");
  validate->add_option("corpus", validate_path, "Corpus file (JSON lines)")->required();

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic corpus");
  synth->add_option("--out,-o", synth_args.out, "Output corpus file")->required();
  synth->add_option("--transcripts", synth_args.transcripts, "Number of transcripts");
  synth->add_option("--moves-mean", synth_args.moves_mean, "Mean moves per transcript");
  synth->add_option("--signal", synth_args.signal, "Class signal strength in [0, 1]");
  synth->add_option("--seed", synth_args.seed, "Seed");
  synth->add_option("--mode", synth_args.mode, "keywords | word-length");
  synth->add_flag("--full-counts", synth_args.full_counts, "Exactly 1034 claims, 655 evidence, 358 warrants");
  synth->add_option("--embeddings", synth_args.embeddings, "Also write hashed word vectors for the vocabulary");

  Common run_opts;
  bool ablate_flag = false;
  auto* run = app.add_subcommand("run", "Cross-validate one experiment config");
  run->add_option("--config,-c", run_opts.config, "Experiment config (JSON)")->required();
  run->add_option("--corpus", run_opts.corpus, "Corpus file")->required();
  run->add_option("--out,-o", run_opts.out, "Output directory")->required();
  run->add_option("--seed", run_opts.seed, "Override the config seed");
  run->add_option("--threads,-j", run_opts.threads, "Fold workers (capped by ARGMINE_THREADS)");
  run->add_flag("--ablate", ablate_flag, "Also run one ablation per feature group");

  Common ablate_opts;
  std::vector<std::string> groups;
  auto* ablate = app.add_subcommand("ablate", "Feature-group ablation for one experiment config");
  ablate->add_option("--config,-c", ablate_opts.config, "Experiment config (JSON)")->required();
  ablate->add_option("--corpus", ablate_opts.corpus, "Corpus file")->required();
  ablate->add_option("--out,-o", ablate_opts.out, "Output directory")->required();
  ablate->add_option("--seed", ablate_opts.seed, "Override the config seed");
  ablate->add_option("--threads,-j", ablate_opts.threads, "Fold workers (capped by ARGMINE_THREADS)");
  ablate->add_option("--groups", groups, "Groups to remove (default: all seven)")->delimiter(',');

  Common matrix_opts;
  auto* matrix = app.add_subcommand("matrix", "Run every results-table row and render the combined table");
  matrix->add_option("--corpus", matrix_opts.corpus, "Corpus file")->required();
  matrix->add_option("--out,-o", matrix_opts.out, "Output directory")->required();
  matrix->add_option("--config,-c", matrix_opts.config, "Matrix config: shared experiment fields and overrides");
  matrix->add_option("--seed", matrix_opts.seed, "Override the seed");
  matrix->add_option("--threads,-j", matrix_opts.threads, "Fold workers (capped by ARGMINE_THREADS)");

  std::string report_in, report_out;
  auto* report = app.add_subcommand("report", "Render report.md from a report.json");
  report->add_option("report", report_in, "report.json")->required();
  report->add_option("--out,-o", report_out, "Output file (default stdout)");

  std::string features_out;
  auto* features = app.add_subcommand("features", "Print the feature catalog (markdown)");
  features->add_option("--out,-o", features_out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*validate) return cmd_validate(validate_path);
    if (*synth) return cmd_synth(synth_args);
    if (*run) return cmd_run(run_opts, ablate_flag, {});
    if (*ablate) return cmd_run(ablate_opts, true, groups);
    if (*matrix) return cmd_matrix(matrix_opts);
    if (*report) return cmd_report(report_in, report_out);
    if (*features) return cmd_features(features_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
