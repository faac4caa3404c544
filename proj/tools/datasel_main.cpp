// Command-line front end: ingest/select/curve/dump-features over manifest
// files. See README.md for the manifest format.

#include <CLI11.hpp>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "datasel/io.hpp"
#include "datasel/pipeline.hpp"

namespace {

using namespace datasel;

struct SelectOptions {
  std::string manifest_path;
  std::string method;
  std::string weights_path;
  std::vector<std::uint64_t> seeds;
  int iterations = -1;
  long long n = -1;
  std::string features;
  std::string output;
  int jobs = 1;
  std::string worker_out;  // single-seed worker mode
};

Manifest load_with_overrides(const SelectOptions& opt) {
  Manifest m = load_manifest(opt.manifest_path);
  if (!opt.seeds.empty()) m.seeds = opt.seeds;
  if (opt.iterations > 0) m.bo.iterations = opt.iterations;
  if (opt.n > 0) m.selection_n = static_cast<std::size_t>(opt.n);
  if (!opt.features.empty()) {
    std::vector<std::string> sets;
    std::string cur;
    for (char c : opt.features + ",") {
      if (c == ',' || c == '+') {
        if (!cur.empty()) sets.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    m.features = feature_config_from_sets(sets, m.features.renyi_alpha, m.features.epsilon);
  }
  if (!opt.output.empty()) m.output_dir = opt.output;
  return m;
}

int run_select_single(const Manifest& m, const SelectOptions& opt) {
  std::optional<WeightArtifact> transfer_weights;
  if (opt.method == "transfer") {
    if (opt.weights_path.empty()) {
      std::cerr << "error: --method transfer requires --weights\n";
      return 2;
    }
    transfer_weights = load_weights(opt.weights_path);
  }
  const PipelineData data = prepare_data(m, /*use_cache=*/true);
  const MethodOutputs outputs = run_method(m, data, opt.method, transfer_weights);

  if (!opt.worker_out.empty()) {
    json blob;
    blob["row"] = report_row_to_json(outputs.report, outputs.report.rows.at(0));
    if (outputs.weights) blob["weights"] = weights_to_json(*outputs.weights);
    if (!outputs.histories.empty()) blob["history"] = history_to_tsv(outputs.histories.at(0));
    write_text_file(opt.worker_out, blob.dump() + "\n");
    return 0;
  }

  write_outputs(m, opt.method, outputs);
  std::cout << report_to_text(outputs.report);
  std::cout << "reports written to " << m.output_dir << "\n";
  return 0;
}

// Spawns one child per seed (at most `jobs` concurrently); each child runs
// this binary in worker mode and the parent merges the per-seed rows. Output
// is bit-identical to a sequential run because every run is seed-determined.
int run_select_jobs(const Manifest& m, const SelectOptions& opt) {
  const auto seeds = m.effective_seeds();
  fs::create_directories(m.output_dir);
  std::vector<std::string> worker_files;
  std::vector<pid_t> running;

  char exe_buf[4096];
  const ssize_t exe_len = readlink("/proc/self/exe", exe_buf, sizeof(exe_buf) - 1);
  require(exe_len > 0, "cannot resolve own executable path");
  const std::string exe(exe_buf, static_cast<std::size_t>(exe_len));

  auto wait_one = [&]() {
    int status = 0;
    const pid_t pid = waitpid(-1, &status, 0);
    require(pid > 0, "waitpid failed");
    require(WIFEXITED(status) && WEXITSTATUS(status) == 0, "worker process ", pid,
            " failed with status ", status);
    running.erase(std::remove(running.begin(), running.end(), pid), running.end());
  };

  for (const auto seed : seeds) {
    const std::string worker_file =
        (fs::path(m.output_dir) / ("worker_" + opt.method + "_seed" + std::to_string(seed) + ".json"))
            .string();
    worker_files.push_back(worker_file);
    std::vector<std::string> args{exe,
                                  "select",
                                  opt.manifest_path,
                                  "--method", opt.method,
                                  "--seed", std::to_string(seed),
                                  "--worker-out", worker_file};
    if (!opt.weights_path.empty()) { args.push_back("--weights"); args.push_back(opt.weights_path); }
    if (opt.iterations > 0) { args.push_back("--iterations"); args.push_back(std::to_string(opt.iterations)); }
    if (opt.n > 0) { args.push_back("--n"); args.push_back(std::to_string(opt.n)); }
    if (!opt.features.empty()) { args.push_back("--features"); args.push_back(opt.features); }
    if (!opt.output.empty()) { args.push_back("--output"); args.push_back(opt.output); }

    while (running.size() >= static_cast<std::size_t>(opt.jobs)) wait_one();
    const pid_t pid = fork();
    require(pid >= 0, "fork failed");
    if (pid == 0) {
      std::vector<char*> argv;
      for (auto& a : args) argv.push_back(a.data());
      argv.push_back(nullptr);
      execv(exe.c_str(), argv.data());
      std::perror("execv");
      _exit(127);
    }
    running.push_back(pid);
  }
  while (!running.empty()) wait_one();

  // merge per-seed rows (seed order == sequential order)
  MethodOutputs merged;
  merged.report.method = opt.method;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const json blob = json::parse(read_text_file(worker_files[i]));
    const json& row = blob.at("row");
    merged.report.target = row.at("target").get<std::string>();
    merged.report.task = row.at("task").get<std::string>();
    RunRow r;
    r.seed = row.at("seed").get<std::uint64_t>();
    r.value = row.at("value").get<double>();
    if (row.contains("validation")) r.validation = row.at("validation").get<double>();
    merged.report.rows.push_back(r);
    if (blob.contains("weights")) {
      const WeightArtifact part = weights_from_json(blob.at("weights"));
      if (!merged.weights) {
        merged.weights = part;
      } else {
        merged.weights->runs.push_back(part.runs.at(0));
      }
    }
    if (blob.contains("history")) {
      const std::string path =
          (fs::path(m.output_dir) /
           ("history_" + opt.method + "_seed" + std::to_string(r.seed) + ".tsv"))
              .string();
      write_text_file(path, blob.at("history").get<std::string>());
    }
  }
  merged.report.finalize();
  if (merged.weights) {
    merged.weights->best_index = 0;
    for (std::size_t i = 1; i < merged.weights->runs.size(); ++i) {
      if (merged.weights->runs[i].validation >
          merged.weights->runs[merged.weights->best_index].validation) {
        merged.weights->best_index = i;
      }
    }
  }
  write_outputs(m, opt.method, merged);
  std::cout << report_to_text(merged.report);
  std::cout << "reports written to " << m.output_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"learned data selection for transfer learning"};
  app.require_subcommand(1);

  std::string ingest_manifest;
  auto* cmd_ingest = app.add_subcommand("ingest", "validate inputs and cache corpus artifacts");
  cmd_ingest->add_option("manifest", ingest_manifest, "manifest file")->required();

  SelectOptions sel;
  auto* cmd_select = app.add_subcommand("select", "run a data-selection method end to end");
  cmd_select->add_option("manifest", sel.manifest_path, "manifest file")->required();
  cmd_select->add_option("--method", sel.method, "random|js-examples|js-domain|learned|all-source|transfer")
      ->required();
  cmd_select->add_option("--weights", sel.weights_path, "weight artifact for --method transfer");
  cmd_select->add_option("--seed", sel.seeds, "override manifest seeds (repeatable)");
  cmd_select->add_option("--iterations", sel.iterations, "override BO iterations");
  cmd_select->add_option("--n", sel.n, "override selection size");
  cmd_select->add_option("--features", sel.features,
                         "override feature sets, e.g. sim-term+div or sim-term,sim-topic");
  cmd_select->add_option("--output", sel.output, "override output directory");
  cmd_select->add_option("--jobs", sel.jobs, "run seeds in parallel worker processes")
      ->check(CLI::PositiveNumber);
  cmd_select->add_option("--worker-out", sel.worker_out, "single-seed worker mode (internal)");

  std::vector<std::string> curve_files;
  std::string curve_out;
  auto* cmd_curve = app.add_subcommand("curve", "extract best-so-far curves from BO histories");
  cmd_curve->add_option("history", curve_files, "history TSV file(s)")->required();
  cmd_curve->add_option("--out", curve_out, "write the table to a file instead of stdout");

  std::string dump_manifest, dump_out;
  auto* cmd_dump = app.add_subcommand("dump-features", "write the pool feature matrix as TSV");
  cmd_dump->add_option("manifest", dump_manifest, "manifest file")->required();
  cmd_dump->add_option("--out", dump_out, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_ingest->parsed()) {
      const Manifest m = load_manifest(ingest_manifest);
      std::string message;
      ingest(m, &message);
      std::cout << message << "\n";
      return 0;
    }
    if (cmd_select->parsed()) {
      const Manifest m = load_with_overrides(sel);
      if (sel.jobs > 1 && m.effective_seeds().size() > 1 && sel.worker_out.empty()) {
        return run_select_jobs(m, sel);
      }
      if (!sel.worker_out.empty() && m.effective_seeds().size() != 1) {
        std::cerr << "error: --worker-out requires exactly one seed\n";
        return 2;
      }
      return run_select_single(m, sel);
    }
    if (cmd_curve->parsed()) {
      std::vector<std::string> labels;
      for (const auto& f : curve_files) labels.push_back(detail::filename_stem(f));
      const std::string table = curve_table(curve_files, labels);
      if (curve_out.empty()) {
        std::cout << table;
      } else {
        write_text_file(curve_out, table);
      }
      return 0;
    }
    if (cmd_dump->parsed()) {
      const Manifest m = load_manifest(dump_manifest);
      const PipelineData data = prepare_data(m, /*use_cache=*/false);
      const RunContext ctx = make_context(m, data);
      const FeatureMatrix matrix = ctx.build_matrix();
      std::vector<std::string> ids;
      for (const auto& ex : data.pool) ids.push_back(ex.id);
      const std::string tsv = matrix.to_tsv(ids);
      if (dump_out.empty()) {
        std::cout << tsv;
      } else {
        write_text_file(dump_out, tsv);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
