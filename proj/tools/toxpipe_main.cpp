// Command-line front end for the corpus-curation pipeline: score texts for
// toxicity along five dimensions, triage them into treatment tiers, and
// route flagged texts to an LLM endpoint for content warnings or rewrites.
//
// Logs go to stderr; data goes to files (and stdout for evaluate/report
// tables). All outputs are deterministic given the same config and a
// deterministic transport.

#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "toxpipe/annotation.hpp"
#include "toxpipe/classifier.hpp"
#include "toxpipe/config.hpp"
#include "toxpipe/corpus.hpp"
#include "toxpipe/http_transport.hpp"
#include "toxpipe/llm_client.hpp"
#include "toxpipe/metrics.hpp"
#include "toxpipe/prompts.hpp"
#include "toxpipe/scores.hpp"
#include "toxpipe/triage.hpp"

namespace {

namespace fs = std::filesystem;
using toxpipe::Json;

constexpr int kExitOk = 0;
constexpr int kExitOverCeiling = 1;
constexpr int kExitError = 2;

struct CliExtras {
  std::string cm_path;  // evaluate: confusion-matrix fixture file
};

void log_line(const toxpipe::PipelineConfig& config, const std::string& message) {
  if (config.verbosity > 0) std::cerr << message << "\n";
}

std::string output_file(const toxpipe::PipelineConfig& config, const std::string& name) {
  if (config.output_dir.empty()) return name;
  fs::create_directories(config.output_dir);
  return (fs::path(config.output_dir) / name).string();
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

Json seeds_json(const toxpipe::PipelineConfig& config) {
  Json j;
  j["data"] = config.data_seed;
  j["train"] = config.train.seed;
  return j;
}

std::vector<toxpipe::CorpusRecord> read_input(const toxpipe::PipelineConfig& config) {
  if (config.input_path.empty())
    throw std::invalid_argument("no input corpus given (--input)");
  std::vector<toxpipe::ReadDiagnostic> diagnostics;
  auto records = toxpipe::read_corpus(config.input_path, config.strict, &diagnostics);
  for (const auto& d : diagnostics)
    std::cerr << "[read] " << config.input_path << ":" << d.line << ": skipped: "
              << d.message << "\n";
  return records;
}

std::string model_file(const toxpipe::PipelineConfig& config) {
  if (!config.model_path.empty()) return config.model_path;
  return output_file(config, "model.bin");
}

int exit_for_failure_rate(const toxpipe::PipelineConfig& config, const char* command,
                          std::uint64_t failed, std::uint64_t requested) {
  const double rate = requested == 0
                          ? 0.0
                          : static_cast<double>(failed) / static_cast<double>(requested);
  if (rate > config.fail_ceiling) {
    std::cerr << "[" << command << "] failure rate "
              << rate << " exceeds ceiling " << config.fail_ceiling << "\n";
    return kExitOverCeiling;
  }
  return kExitOk;
}

// --- annotate ---------------------------------------------------------------

int cmd_annotate(const toxpipe::PipelineConfig& config) {
  const auto records = read_input(config);
  toxpipe::TemplateRegistry templates =
      config.templates_dir.empty() ? toxpipe::TemplateRegistry()
                                   : toxpipe::TemplateRegistry(config.templates_dir);
  auto transport = toxpipe::make_transport(config.endpoint);

  std::vector<toxpipe::AnnotateItem> items;
  items.reserve(records.size());
  for (const auto& r : records) items.push_back({r.id, r.text, r.language});

  std::map<std::string, toxpipe::AnnotationOutcome> outcomes;
  const toxpipe::RunManifest manifest = toxpipe::annotate_batch(
      items, config.endpoint, templates, *transport,
      [&](const toxpipe::AnnotationOutcome& outcome) {
        outcomes.emplace(outcome.id, outcome);
      });

  // Outputs are written in input order regardless of completion order.
  toxpipe::CorpusWriter annotated(output_file(config, "annotated.jsonl"));
  toxpipe::CorpusWriter failures(output_file(config, "annotate_failures.jsonl"));
  for (const auto& record : records) {
    const toxpipe::AnnotationOutcome& outcome = outcomes.at(record.id);
    if (std::holds_alternative<toxpipe::RawAnnotation>(outcome.result)) {
      toxpipe::CorpusRecord out = record;
      out.scores =
          toxpipe::merge_to_canonical(std::get<toxpipe::RawAnnotation>(outcome.result));
      toxpipe::Provenance prov;
      prov.annotator = config.endpoint.model;
      prov.template_version = outcome.template_version;
      prov.timestamp = config.timestamp;
      out.provenance = prov;
      annotated.write(out);
    } else {
      toxpipe::CorpusRecord out = record;
      toxpipe::Provenance prov;
      prov.annotator = config.endpoint.model;
      prov.template_version = outcome.template_version;
      prov.timestamp = config.timestamp;
      if (std::holds_alternative<toxpipe::ParseFailure>(outcome.result)) {
        const auto& f = std::get<toxpipe::ParseFailure>(outcome.result);
        prov.edits = std::vector<std::string>{
            "annotation failed: " + std::string(toxpipe::to_string(f.kind)) + ": " +
            f.detail};
      } else {
        const auto& f = std::get<toxpipe::TransportFailure>(outcome.result);
        prov.edits = std::vector<std::string>{"annotation failed: transport: " + f.message};
      }
      out.provenance = prov;
      failures.write(out);
    }
  }
  annotated.close();
  failures.close();

  Json mj = manifest.to_json();
  mj["config_hash"] = toxpipe::config_hash(config);
  mj["seeds"] = seeds_json(config);
  mj["endpoint_model"] = config.endpoint.model;
  write_json_file(output_file(config, "annotate_manifest.json"), mj);

  log_line(config, "[annotate] " + std::to_string(manifest.requested) + " records, " +
                       std::to_string(manifest.succeeded) + " annotated, " +
                       std::to_string(manifest.failed()) + " failed, " +
                       std::to_string(manifest.retries) + " retries");
  return exit_for_failure_rate(config, "annotate", manifest.failed(), manifest.requested);
}

// --- train -------------------------------------------------------------------

std::vector<toxpipe::LabeledSample> to_samples(
    const std::vector<toxpipe::CorpusRecord>& records) {
  std::vector<toxpipe::LabeledSample> samples;
  samples.reserve(records.size());
  for (const auto& r : records) samples.push_back({r.text, *r.scores});
  return samples;
}

Json metrics_json(const toxpipe::MetricsReport& m) {
  Json j;
  j["precision_weighted"] = m.precision_weighted;
  j["recall_weighted"] = m.recall_weighted;
  j["f1_weighted"] = m.f1_weighted;
  j["accuracy"] = m.accuracy;
  j["weighted_accuracy"] = m.weighted_accuracy;
  return j;
}

int cmd_train(const toxpipe::PipelineConfig& config) {
  auto records = read_input(config);
  std::vector<toxpipe::CorpusRecord> labeled;
  labeled.reserve(records.size());
  std::size_t unlabeled = 0;
  for (auto& r : records) {
    if (r.scores) {
      labeled.push_back(std::move(r));
    } else if (config.strict) {
      throw std::runtime_error("train: record '" + r.id + "' has no scores");
    } else {
      ++unlabeled;
    }
  }
  if (unlabeled > 0)
    std::cerr << "[train] skipped " << unlabeled << " unlabeled records\n";
  if (labeled.empty()) throw std::runtime_error("train: no labeled records in corpus");

  auto [balanced, balance_report] = toxpipe::balance(labeled, config.data_seed);
  if (balance_report.toxic_count == 0)
    std::cerr << "[train] warning: corpus has no toxic records; nothing was dropped\n";
  toxpipe::SplitResult splits =
      toxpipe::split(balanced, config.split, config.data_seed);
  if (splits.train.empty() || splits.validation.empty())
    throw std::runtime_error("train: empty train or validation split; adjust fractions");

  const auto train_samples = to_samples(splits.train);
  const auto valid_samples = to_samples(splits.validation);
  toxpipe::TrainResult result =
      toxpipe::train(train_samples, valid_samples, config.train);

  const std::string model_path = model_file(config);
  toxpipe::save_model(model_path, result.model);

  const bool have_test = !splits.test.empty();
  const auto eval_samples = have_test ? to_samples(splits.test) : valid_samples;
  const auto cms = toxpipe::accumulate_confusion(result.model, eval_samples);

  Json report;
  report["config_hash"] = toxpipe::config_hash(config);
  report["seeds"] = seeds_json(config);
  report["model"] = model_path;
  report["model_config_hash"] = result.model.config_hash;
  report["balance"] = {
      {"zero_sum_before", balance_report.zero_sum_before},
      {"zero_sum_after", balance_report.zero_sum_after},
      {"toxic_count", balance_report.toxic_count},
      {"dropped", balance_report.dropped},
      {"seed", balance_report.seed},
  };
  report["split_sizes"] = {
      {"train", splits.train.size()},
      {"validation", splits.validation.size()},
      {"test", splits.test.size()},
  };
  report["epochs_run"] = result.model.epochs_run;
  report["best_epoch"] = result.best_epoch;
  Json history = Json::array();
  for (const auto& e : result.history) {
    history.push_back({
        {"epoch", e.epoch},
        {"train_loss", e.train_loss},
        {"valid_loss", e.valid_loss},
        {"valid_mean_weighted_accuracy", e.valid_mean_weighted_accuracy},
    });
  }
  report["history"] = history;
  report["evaluation_split"] = have_test ? "test" : "validation";
  Json per_head = Json::object();
  for (std::size_t h = 0; h < toxpipe::kNumDimensions; ++h)
    per_head[std::string(toxpipe::kDimensionNames[h])] =
        metrics_json(toxpipe::compute_metrics(cms[h]));
  report["per_head"] = per_head;
  write_json_file(output_file(config, "train_report.json"), report);

  log_line(config, "[train] " + std::to_string(splits.train.size()) + " train / " +
                       std::to_string(splits.validation.size()) + " validation, " +
                       std::to_string(result.model.epochs_run) + " epochs, model -> " +
                       model_path);
  return kExitOk;
}

// --- classify / triage --------------------------------------------------------

int cmd_classify(const toxpipe::PipelineConfig& config) {
  const auto records = read_input(config);
  const toxpipe::MultiHeadModel model = toxpipe::load_model(model_file(config));

  const auto start = std::chrono::steady_clock::now();
  toxpipe::CorpusWriter writer(output_file(config, "classified.jsonl"));
  for (const auto& record : records) {
    toxpipe::CorpusRecord out = record;
    out.scores = toxpipe::predict(model, record.text);
    toxpipe::Provenance prov;
    prov.annotator = "multihead-classifier";
    prov.template_version = model.config_hash;
    prov.timestamp = config.timestamp;
    out.provenance = prov;
    writer.write(out);
  }
  writer.close();
  const auto elapsed = std::chrono::duration<double>(
      std::chrono::steady_clock::now() - start).count();

  Json mj;
  mj["config_hash"] = toxpipe::config_hash(config);
  mj["seeds"] = seeds_json(config);
  mj["records"] = records.size();
  mj["model_config_hash"] = model.config_hash;
  write_json_file(output_file(config, "classify_manifest.json"), mj);

  // Throughput goes to stderr only; manifests must not vary across reruns.
  if (config.verbosity > 0) {
    std::cerr << "[classify] " << records.size() << " records, throughput: "
              << (elapsed > 0 ? static_cast<double>(records.size()) / elapsed : 0.0)
              << " records/s\n";
  }
  return kExitOk;
}

int cmd_triage(const toxpipe::PipelineConfig& config) {
  const auto records = read_input(config);
  std::array<std::uint64_t, 3> tier_counts{};
  std::uint64_t unscored = 0;

  const auto start = std::chrono::steady_clock::now();
  toxpipe::CorpusWriter writer(output_file(config, "triaged.jsonl"));
  for (const auto& record : records) {
    if (!record.scores) {
      if (config.strict)
        throw std::runtime_error("triage: record '" + record.id + "' has no scores");
      ++unscored;
      continue;
    }
    toxpipe::CorpusRecord out = record;
    out.tier = toxpipe::triage(*record.scores, config.triage);
    ++tier_counts[static_cast<std::size_t>(*out.tier)];
    writer.write(out);
  }
  writer.close();
  const auto elapsed = std::chrono::duration<double>(
      std::chrono::steady_clock::now() - start).count();

  Json mj;
  mj["config_hash"] = toxpipe::config_hash(config);
  mj["seeds"] = seeds_json(config);
  mj["records"] = records.size();
  mj["tiers"] = {
      {"no_toxicity", tier_counts[0]},
      {"mild_toxicity", tier_counts[1]},
      {"toxic_content", tier_counts[2]},
  };
  mj["skipped_unscored"] = unscored;
  write_json_file(output_file(config, "triage_manifest.json"), mj);

  if (config.verbosity > 0) {
    std::cerr << "[triage] no_toxicity=" << tier_counts[0]
              << " mild_toxicity=" << tier_counts[1]
              << " toxic_content=" << tier_counts[2] << ", throughput: "
              << (elapsed > 0 ? static_cast<double>(records.size()) / elapsed : 0.0)
              << " records/s\n";
  }
  return exit_for_failure_rate(config, "triage", unscored, records.size());
}

// --- treat ---------------------------------------------------------------------

int cmd_treat(const toxpipe::PipelineConfig& config) {
  const auto records = read_input(config);
  toxpipe::TemplateRegistry templates =
      config.templates_dir.empty() ? toxpipe::TemplateRegistry()
                                   : toxpipe::TemplateRegistry(config.templates_dir);
  auto transport = toxpipe::make_transport(config.endpoint);

  toxpipe::CorpusWriter treated(output_file(config, "treated.jsonl"));
  toxpipe::CorpusWriter failures(output_file(config, "treat_failures.jsonl"));
  std::array<std::uint64_t, 3> treated_counts{};
  std::uint64_t failed = 0;
  std::uint64_t not_toxic_verdicts = 0;

  for (const auto& record : records) {
    std::optional<toxpipe::TriageTier> tier = record.tier;
    if (!tier && record.scores) tier = toxpipe::triage(*record.scores, config.triage);
    if (!tier) {
      if (config.strict)
        throw std::runtime_error("treat: record '" + record.id +
                                 "' has neither tier nor scores");
      ++failed;
      failures.write(record);
      continue;
    }

    toxpipe::CorpusRecord out = record;
    out.tier = tier;
    const toxpipe::AnnotateItem item{record.id, record.text, record.language};
    try {
      switch (toxpipe::treatment_for(*tier)) {
        case toxpipe::Treatment::kPassThrough:
          break;
        case toxpipe::Treatment::kContentWarning: {
          const toxpipe::WarningOutcome outcome = toxpipe::content_warning(
              item, record.scores, templates, *transport, config.endpoint);
          out.treatment_output = outcome.result.warning_text;
          toxpipe::Provenance prov;
          prov.annotator = config.endpoint.model;
          prov.template_version = outcome.template_version;
          prov.timestamp = config.timestamp;
          if (outcome.result.not_toxic) {
            prov.not_toxic = true;
            ++not_toxic_verdicts;
          }
          out.provenance = prov;
          break;
        }
        case toxpipe::Treatment::kRewrite: {
          const toxpipe::RewriteOutcome outcome =
              toxpipe::rewrite(item, templates, *transport, config.endpoint);
          out.treatment_output = outcome.result.rewritten_text;
          toxpipe::Provenance prov;
          prov.annotator = config.endpoint.model;
          prov.template_version = outcome.template_version;
          prov.timestamp = config.timestamp;
          prov.edits = outcome.result.edits;
          if (outcome.result.not_toxic) {
            prov.not_toxic = true;
            ++not_toxic_verdicts;
          }
          out.provenance = prov;
          break;
        }
      }
    } catch (const toxpipe::TreatmentError& e) {
      ++failed;
      std::cerr << "[treat] " << e.what() << "\n";
      failures.write(record);
      continue;
    }
    ++treated_counts[static_cast<std::size_t>(*tier)];
    treated.write(out);
  }
  treated.close();
  failures.close();

  Json mj;
  mj["config_hash"] = toxpipe::config_hash(config);
  mj["seeds"] = seeds_json(config);
  mj["records"] = records.size();
  mj["pass_through"] = treated_counts[0];
  mj["content_warnings"] = treated_counts[1];
  mj["rewrites"] = treated_counts[2];
  mj["not_toxic_verdicts"] = not_toxic_verdicts;
  mj["failed"] = failed;
  mj["endpoint_model"] = config.endpoint.model;
  write_json_file(output_file(config, "treat_manifest.json"), mj);

  log_line(config,
           "[treat] pass_through=" + std::to_string(treated_counts[0]) +
               " warnings=" + std::to_string(treated_counts[1]) +
               " rewrites=" + std::to_string(treated_counts[2]) +
               " failed=" + std::to_string(failed));
  return exit_for_failure_rate(config, "treat", failed, records.size());
}

// --- evaluate / report ----------------------------------------------------------

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

void print_metrics_row(std::ostream& os, const std::string& name,
                       const toxpipe::MetricsReport& m) {
  os << name << "\t" << fixed3(m.precision_weighted) << "\t"
     << fixed3(m.recall_weighted) << "\t" << fixed3(m.f1_weighted) << "\t"
     << fixed3(m.accuracy) << "\t" << fixed3(m.weighted_accuracy) << "\n";
}

toxpipe::ConfusionMatrix cm_from_json(const Json& rows, const std::string& name) {
  if (!rows.is_array() || rows.size() != toxpipe::kNumClasses)
    throw std::runtime_error("matrix '" + name + "' must have 4 rows");
  toxpipe::ConfusionMatrix cm;
  for (std::size_t i = 0; i < toxpipe::kNumClasses; ++i) {
    if (!rows[i].is_array() || rows[i].size() != toxpipe::kNumClasses)
      throw std::runtime_error("matrix '" + name + "' row " + std::to_string(i) +
                               " must have 4 columns");
    for (std::size_t j = 0; j < toxpipe::kNumClasses; ++j)
      cm.cells[i][j] = rows[i][j].get<std::uint64_t>();
  }
  return cm;
}

int cmd_evaluate(const toxpipe::PipelineConfig& config, const CliExtras& extras) {
  std::map<std::string, toxpipe::MetricsReport> reports;

  if (!extras.cm_path.empty()) {
    std::ifstream in(extras.cm_path);
    if (!in) throw std::runtime_error("cannot open " + extras.cm_path);
    const Json j = Json::parse(in);
    if (!j.contains("matrices") || !j["matrices"].is_object())
      throw std::runtime_error(extras.cm_path + ": expected a 'matrices' object");
    for (const auto& [name, rows] : j["matrices"].items())
      reports[name] = toxpipe::compute_metrics(cm_from_json(rows, name));
  } else {
    const auto records = read_input(config);
    std::vector<toxpipe::LabeledSample> samples;
    for (const auto& r : records) {
      if (!r.scores) {
        if (config.strict)
          throw std::runtime_error("evaluate: record '" + r.id + "' has no scores");
        continue;
      }
      samples.push_back({r.text, *r.scores});
    }
    if (samples.empty()) throw std::runtime_error("evaluate: no labeled records");
    const toxpipe::MultiHeadModel model = toxpipe::load_model(model_file(config));
    const auto cms = toxpipe::accumulate_confusion(model, samples);
    for (std::size_t h = 0; h < toxpipe::kNumDimensions; ++h)
      reports[std::string(toxpipe::kDimensionNames[h])] =
          toxpipe::compute_metrics(cms[h]);
  }

  std::cout << "dimension\tprecision\trecall\tf1\taccuracy\tweighted_accuracy\n";
  // Canonical dimension order first, then anything else alphabetically.
  std::vector<std::string> ordered;
  for (std::string_view name : toxpipe::kDimensionNames)
    if (reports.count(std::string(name))) ordered.emplace_back(name);
  for (const auto& [name, m] : reports)
    if (std::find(ordered.begin(), ordered.end(), name) == ordered.end())
      ordered.push_back(name);
  Json out_json = Json::object();
  for (const std::string& name : ordered) {
    print_metrics_row(std::cout, name, reports.at(name));
    out_json[name] = metrics_json(reports.at(name));
  }

  if (!config.output_dir.empty()) {
    Json report;
    report["config_hash"] = toxpipe::config_hash(config);
    report["metrics"] = out_json;
    write_json_file(output_file(config, "evaluate_report.json"), report);
  }
  return kExitOk;
}

int cmd_report(const toxpipe::PipelineConfig& config) {
  const auto records = read_input(config);
  std::vector<toxpipe::ToxicityScores> scores;
  scores.reserve(records.size());
  for (const auto& r : records) {
    if (!r.scores) {
      if (config.strict)
        throw std::runtime_error("report: record '" + r.id + "' has no scores");
      continue;
    }
    scores.push_back(*r.scores);
  }
  if (scores.empty()) throw std::runtime_error("report: no scored records");
  const toxpipe::ScoreDistribution dist = toxpipe::score_distribution(scores);

  constexpr int kBarWidth = 40;
  for (std::size_t d = 0; d < toxpipe::kNumDimensions; ++d) {
    std::cout << toxpipe::kDimensionNames[d] << "\n";
    for (std::size_t c = 0; c < toxpipe::kNumClasses; ++c) {
      const double p = dist.proportions[d][c];
      const int bar = static_cast<int>(p * kBarWidth + 0.5);
      char pct[16];
      std::snprintf(pct, sizeof(pct), "%6.2f%%", p * 100.0);
      std::cout << "  " << c << " |" << std::string(static_cast<std::size_t>(bar), '#')
                << std::string(static_cast<std::size_t>(kBarWidth - bar), ' ') << "| "
                << pct << " (" << dist.counts[d][c] << ")\n";
    }
  }

  if (!config.output_dir.empty()) {
    Json rj;
    rj["config_hash"] = toxpipe::config_hash(config);
    rj["total"] = dist.total;
    Json dims = Json::object();
    for (std::size_t d = 0; d < toxpipe::kNumDimensions; ++d) {
      Json entry;
      entry["counts"] = dist.counts[d];
      entry["proportions"] = dist.proportions[d];
      dims[std::string(toxpipe::kDimensionNames[d])] = entry;
    }
    rj["dimensions"] = dims;
    write_json_file(output_file(config, "report.json"), rj);

    const std::string tsv_path = output_file(config, "report.tsv");
    std::ofstream tsv(tsv_path, std::ios::binary | std::ios::trunc);
    if (!tsv) throw std::runtime_error("cannot open " + tsv_path);
    tsv << "dimension\tscore\tcount\tproportion\n";
    for (std::size_t d = 0; d < toxpipe::kNumDimensions; ++d)
      for (std::size_t c = 0; c < toxpipe::kNumClasses; ++c) {
        char prop[32];
        std::snprintf(prop, sizeof(prop), "%.6f", dist.proportions[d][c]);
        tsv << toxpipe::kDimensionNames[d] << "\t" << c << "\t" << dist.counts[d][c]
            << "\t" << prop << "\n";
      }
    if (!tsv) throw std::runtime_error("write failed: " + tsv_path);
  }
  return kExitOk;
}

// --- pipeline --------------------------------------------------------------------

int cmd_pipeline(const toxpipe::PipelineConfig& config) {
  toxpipe::PipelineConfig stage = config;

  int rc = cmd_annotate(stage);
  if (rc != kExitOk) return rc;

  stage.input_path = output_file(config, "annotated.jsonl");
  rc = cmd_train(stage);
  if (rc != kExitOk) return rc;

  rc = cmd_classify(stage);
  if (rc != kExitOk) return rc;

  stage.input_path = output_file(config, "classified.jsonl");
  rc = cmd_triage(stage);
  if (rc != kExitOk) return rc;

  stage.input_path = output_file(config, "triaged.jsonl");
  return cmd_treat(stage);
}

// --- flag wiring -------------------------------------------------------------------

// Flags write into a JSON overlay applied after the config file, giving the
// documented precedence: flags > config file > defaults.
void add_common_options(CLI::App* cmd, Json& overlay, std::string& config_file) {
  cmd->add_option("--config", config_file, "JSON config file");
  auto str = [&overlay, cmd](const char* flag, const char* key, const char* help,
                             const char* section = nullptr) {
    std::string section_s = section ? section : "";
    std::string key_s = key;
    cmd->add_option_function<std::string>(
        flag,
        [&overlay, section_s, key_s](const std::string& v) {
          if (section_s.empty())
            overlay[key_s] = v;
          else
            overlay[section_s][key_s] = v;
        },
        help);
  };
  auto num = [&overlay, cmd](const char* flag, const char* key, const char* help,
                             const char* section = nullptr) {
    std::string section_s = section ? section : "";
    std::string key_s = key;
    cmd->add_option_function<double>(
        flag,
        [&overlay, section_s, key_s](double v) {
          if (section_s.empty())
            overlay[key_s] = v;
          else
            overlay[section_s][key_s] = v;
        },
        help);
  };
  auto integer = [&overlay, cmd](const char* flag, const char* key, const char* help,
                                 const char* section = nullptr) {
    std::string section_s = section ? section : "";
    std::string key_s = key;
    cmd->add_option_function<std::int64_t>(
        flag,
        [&overlay, section_s, key_s](std::int64_t v) {
          if (section_s.empty())
            overlay[key_s] = v;
          else
            overlay[section_s][key_s] = v;
        },
        help);
  };
  auto seed = [&overlay, cmd](const char* flag, const char* key, const char* help,
                              const char* section = nullptr) {
    std::string section_s = section ? section : "";
    std::string key_s = key;
    cmd->add_option_function<std::uint64_t>(
        flag,
        [&overlay, section_s, key_s](std::uint64_t v) {
          if (section_s.empty())
            overlay[key_s] = v;
          else
            overlay[section_s][key_s] = v;
        },
        help);
  };

  str("--input,-i", "input", "input corpus (.jsonl or .jsonl.gz)");
  str("--output-dir,-o", "output_dir", "directory for output artifacts");
  str("--model,-m", "model", "model file path");
  str("--templates-dir", "templates_dir", "directory of prompt template overrides");
  str("--timestamp", "timestamp", "provenance timestamp (empty keeps reruns identical)");
  seed("--data-seed", "data_seed", "seed for balancing and splitting");
  num("--fail-ceiling", "fail_ceiling", "tolerated per-record failure rate");
  integer("--verbosity", "verbosity", "0 silences progress logs");
  cmd->add_flag_function("--strict", [&overlay](std::int64_t) { overlay["strict"] = true; },
                         "malformed input is fatal (default)");
  cmd->add_flag_function("--lenient", [&overlay](std::int64_t) { overlay["strict"] = false; },
                         "skip malformed input with a diagnostic");

  integer("--no-tox-max-total", "no_tox_max_total", "triage: max total for no_toxicity",
          "triage");
  integer("--no-tox-max-single", "no_tox_max_single",
          "triage: max single score for no_toxicity", "triage");
  integer("--mild-min-total", "mild_min_total", "triage: min total for mild_toxicity",
          "triage");
  integer("--mild-max-total", "mild_max_total", "triage: max total for mild_toxicity",
          "triage");
  integer("--toxic-min-total", "toxic_min_total", "triage: min total for toxic_content",
          "triage");

  integer("--max-epochs", "max_epochs", "training epochs cap", "train");
  num("--learning-rate", "learning_rate", "gradient step size", "train");
  integer("--batch-size", "batch_size", "mini-batch size", "train");
  seed("--train-seed", "seed", "training shuffle seed", "train");
  str("--weight-update-source", "weight_update_source",
      "class-weight source: train_epoch or validation", "train");
  num("--weight-floor", "weight_floor", "lower bound on class weights", "train");
  integer("--max-text-length", "max_text_length", "chars kept per text (0 = uncapped)",
          "train");
  integer("--feature-dim", "feature_dim", "hashed feature dimension (power of two)",
          "train");
  cmd->add_flag_function(
      "--dynamic-weights",
      [&overlay](std::int64_t) { overlay["train"]["dynamic_weights"] = true; },
      "recompute class weights each epoch (default)");
  cmd->add_flag_function(
      "--uniform-weights",
      [&overlay](std::int64_t) { overlay["train"]["dynamic_weights"] = false; },
      "ablation: keep class weights uniform");

  num("--split-train", "train", "train fraction", "split");
  num("--split-validation", "validation", "validation fraction", "split");
  num("--split-test", "test", "test fraction", "split");

  str("--endpoint-url", "base_url", "LLM endpoint base URL (http://, or mock://)",
      "endpoint");
  str("--endpoint-model", "model", "model name sent to the endpoint", "endpoint");
  str("--auth-env", "auth_env", "environment variable holding the bearer token",
      "endpoint");
  integer("--max-in-flight", "max_in_flight", "concurrent request cap", "endpoint");
  integer("--timeout-ms", "timeout_ms", "per-request timeout", "endpoint");
  integer("--retry-budget", "retry_budget", "retries per record", "endpoint");
  str("--language", "language", "default template language", "endpoint");
  num("--temperature", "temperature", "sampling temperature", "endpoint");
  integer("--backoff-ms", "backoff_base_ms", "retry backoff base (0 disables sleeps)",
          "endpoint");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"toxicity corpus-curation pipeline"};
  app.require_subcommand(1);

  Json overlay = Json::object();
  std::string config_file;
  CliExtras extras;

  struct SubcommandSpec {
    const char* name;
    const char* help;
  };
  const std::vector<SubcommandSpec> specs = {
      {"annotate", "score a corpus through the LLM annotation protocol"},
      {"train", "balance, split, and train the multi-head classifier"},
      {"classify", "predict scores for a corpus with a trained model"},
      {"triage", "assign treatment tiers from scores"},
      {"treat", "apply pass-through / content warning / rewrite per tier"},
      {"evaluate", "compute metrics from a model or confusion-matrix fixture"},
      {"report", "score-distribution histograms and tables"},
      {"pipeline", "annotate, train, classify, triage, and treat in sequence"},
  };
  std::map<std::string, CLI::App*> subcommands;
  for (const auto& spec : specs) {
    CLI::App* cmd = app.add_subcommand(spec.name, spec.help);
    add_common_options(cmd, overlay, config_file);
    subcommands[spec.name] = cmd;
  }
  subcommands["evaluate"]->add_option("--cm", extras.cm_path,
                                      "confusion-matrix fixture JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    toxpipe::PipelineConfig config;
    if (!config_file.empty()) config = toxpipe::load_pipeline_config(config_file);
    toxpipe::apply_json_overrides(config, overlay);
    config.check_valid();

    const std::string command = app.get_subcommands().front()->get_name();
    if (command == "annotate") return cmd_annotate(config);
    if (command == "train") return cmd_train(config);
    if (command == "classify") return cmd_classify(config);
    if (command == "triage") return cmd_triage(config);
    if (command == "treat") return cmd_treat(config);
    if (command == "evaluate") return cmd_evaluate(config, extras);
    if (command == "report") return cmd_report(config);
    if (command == "pipeline") return cmd_pipeline(config);
    std::cerr << "unknown command: " << command << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}
