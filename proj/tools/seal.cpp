// seal: scenario perturbation pipeline driver.

#include "seal/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace seal;

namespace {

constexpr int kBackgroundAgents = 3;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<Scenario> load_suite(const fs::path& manifest) {
  std::vector<Scenario> out;
  for (const auto& p : read_manifest(manifest)) out.push_back(load_scenario(p));
  if (out.empty()) throw ValidationError("scenario manifest " + manifest.string() + " lists no scenarios");
  return out;
}

std::vector<fs::path> suite_files(const fs::path& manifest) {
  std::vector<fs::path> files{manifest};
  for (const auto& p : read_manifest(manifest)) files.push_back(p);
  return files;
}

std::string num(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, end);
}

Models load_models(const RunConfig& c) {
  Models m;
  if (!c.scorer_path.empty()) m.scorer = std::make_shared<const ScorerModel>(load_model(c.scorer_path));
  if (!c.skills_path.empty()) {
    auto lib = std::make_shared<const SkillLibrary>(load_library(c.skills_path));
    if (lib->horizon != c.H)
      throw ConfigError("skill library horizon " + std::to_string(lib->horizon) + " differs from H = " + std::to_string(c.H));
    m.skills = lib;
  }
  return m;
}

void require_models(const RunConfig& c, const Models& m) {
  if (c.generator != GeneratorMode::Seal) return;
  const Ablation a = ablation_from_string(c.ablation);
  if (a.objective == Objective::Learned && !m.scorer) throw ConfigError("generator seal needs --scorer");
  if (a.adversary == AdversaryKind::Skill && !m.skills) throw ConfigError("generator seal needs --skills");
}

std::vector<fs::path> model_inputs(const RunConfig& c) {
  std::vector<fs::path> in;
  for (const auto* p : {&c.scorer_path, &c.skills_path, &c.ego_params_path})
    if (!p->empty()) in.push_back(*p);
  return in;
}

/// Flags shared by train-ego and evaluate; applied on top of an optional config file.
struct RunFlags {
  std::string config, scenarios, out, scorer, skills, ego_params, generator, ablation, ego;
  int K = 0, H = 0, offset = 0, generations = 0, population = 0, elite = 0, batch = 0, threads = 0;
  double b = 0, p_max = 0;
  std::uint64_t seed = 0;
  std::map<std::string, CLI::Option*> opts;

  void add(CLI::App* app, bool training) {
    app->add_option("--config", config, "key = value run configuration");
    opts["scenarios"] = app->add_option("--scenarios", scenarios, "scenario manifest");
    opts["out"] = app->add_option("--out", out, "output directory");
    opts["scorer"] = app->add_option("--scorer", scorer, "scorer model");
    opts["skills"] = app->add_option("--skills", skills, "skill library");
    opts["generator"] = app->add_option("--generator", generator, "seal | cat-heuristic | no-adv");
    opts["ablation"] = app->add_option("--ablation", ablation, "seal component ablation");
    opts["K"] = app->add_option("--K", K, "perturbation iterations / history length");
    opts["b"] = app->add_option("--b", b, "collision sensitivity");
    opts["H"] = app->add_option("--H", H, "skill horizon");
    opts["offset"] = app->add_option("--offset", offset, "switch-step offset");
    opts["seed"] = app->add_option("--seed", seed, "run seed");
    opts["threads"] = app->add_option("--threads", threads, "worker threads (0 = all cores)");
    if (training) {
      opts["p_max"] = app->add_option("--p-max", p_max, "final perturbation probability");
      opts["generations"] = app->add_option("--generations", generations);
      opts["population"] = app->add_option("--population", population);
      opts["elite"] = app->add_option("--elite", elite);
      opts["batch"] = app->add_option("--batch", batch, "scenarios per generation");
    } else {
      opts["ego"] = app->add_option("--ego", ego, "replay | idm | trained");
      opts["ego_params"] = app->add_option("--ego-params", ego_params, "trained ego parameters");
    }
  }

  bool given(const std::string& k) const { return opts.contains(k) && opts.at(k)->count() > 0; }

  RunConfig resolve() const {
    RunConfig c = config.empty() ? RunConfig{} : load_config(config);
    if (given("scenarios")) c.scenarios = scenarios;
    if (given("out")) c.out_dir = out;
    if (given("scorer")) c.scorer_path = scorer;
    if (given("skills")) c.skills_path = skills;
    if (given("ego_params")) c.ego_params_path = ego_params;
    if (given("generator")) c.generator = generator_from_string(generator);
    if (given("ablation")) c.ablation = ablation;
    if (given("ego")) c.ego = ego_from_string(ego);
    if (given("K")) c.K = K;
    if (given("b")) c.b = b;
    if (given("H")) c.H = H;
    if (given("offset")) c.offset = offset;
    if (given("seed")) c.seed = seed;
    if (given("threads")) c.threads = threads;
    if (given("p_max")) c.p_max = p_max;
    if (given("generations")) c.generations = generations;
    if (given("population")) c.population = population;
    if (given("elite")) c.elite = elite;
    if (given("batch")) c.batch = batch;
    c.validate();
    if (c.scenarios.empty()) throw ConfigError("no scenario manifest (--scenarios or config 'scenarios')");
    if (c.out_dir.empty()) throw ConfigError("no output directory (--out or config 'out')");
    return c;
  }
};

std::map<std::string, std::string> config_arguments(const RunConfig& c) {
  std::map<std::string, std::string> args;
  std::istringstream in(config_text(c, c.out_dir));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) args[line.substr(0, eq)] = line.substr(eq + 3);
  }
  args.erase("out");
  return args;
}

// ---------------------------------------------------------------------------

int gen_scenarios(std::uint64_t seed, int count, double train_fraction, const fs::path& out) {
  if (count < 1) throw ConfigError("--count must be positive");
  if (train_fraction < 0 || train_fraction > 1) throw ConfigError("--train-fraction must lie in [0, 1]");
  fs::create_directories(out);
  std::vector<fs::path> all, train, eval;
  const int n_train = static_cast<int>(std::lround(train_fraction * count));
  const auto suite = synthetic_suite(seed, count, kBackgroundAgents);
  for (int i = 0; i < count; ++i) {
    const std::string name = suite_scenario_name(i) + ".json";
    save_scenario(suite[static_cast<std::size_t>(i)], out / name);
    all.emplace_back(name);
    (i < n_train ? train : eval).emplace_back(name);
  }
  write_manifest(all, out / "manifest.txt");
  write_manifest(train, out / "train.txt");
  write_manifest(eval, out / "eval.txt");
  RunManifest m{"gen-scenarios",
                {{"seed", std::to_string(seed)}, {"count", std::to_string(count)}, {"train_fraction", num(train_fraction)}},
                {},
                {out / "manifest.txt", out / "train.txt", out / "eval.txt"}};
  for (const auto& p : all) m.outputs.push_back(out / p);
  write_run_manifest(m, out);
  std::cout << "wrote " << count << " scenarios (" << train.size() << " train, " << eval.size() << " eval) to "
            << out.string() << '\n';
  return 0;
}

int collect_demos(const fs::path& scenarios, std::uint64_t seed, int rounds, const fs::path& out) {
  if (rounds < 1) throw ConfigError("--rounds must be positive");
  const auto suite = load_suite(scenarios);
  fs::create_directories(out);
  std::ostringstream lines;
  for (int r = 0; r < rounds; ++r) {
    const DemoCorpus c = collect_demonstrations(suite, mix_seed({seed, static_cast<std::uint64_t>(r)}));
    for (const auto& roll : c.rollouts) lines << rollout_line(roll) << '\n';
  }
  write_text(out / "rollouts.jsonl", lines.str());
  // build-skills pairs every roll-out with its scenario through this list
  std::vector<fs::path> paths;
  for (int r = 0; r < rounds; ++r)
    for (const auto& p : read_manifest(scenarios)) paths.push_back(fs::proximate(fs::absolute(p), fs::absolute(out)));
  write_manifest(paths, out / "scenarios.txt");
  write_run_manifest({"collect-demos",
                      {{"seed", std::to_string(seed)}, {"rounds", std::to_string(rounds)}},
                      suite_files(scenarios),
                      {out / "rollouts.jsonl", out / "scenarios.txt"}},
                     out);
  std::cout << "wrote " << suite.size() * static_cast<std::size_t>(rounds) << " demonstration roll-outs\n";
  return 0;
}

int build_skills(const fs::path& demos, int clusters, int horizon, std::uint64_t seed, const fs::path& out) {
  if (clusters < 1 || horizon < 2) throw ConfigError("need --clusters >= 1 and --horizon >= 2");
  DemoCorpus corpus;
  for (const auto& p : read_manifest(demos / "scenarios.txt")) corpus.scenarios.push_back(load_scenario(p));
  std::istringstream in(read_text(demos / "rollouts.jsonl"));
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) corpus.rollouts.push_back(parse_rollout_line(line));
  if (corpus.rollouts.size() != corpus.scenarios.size())
    throw ValidationError("demonstration roll-outs and scenarios differ in number");
  const auto segments = segment_and_label(corpus, horizon);
  const SkillLibrary lib = build_library(segments, clusters, seed);
  fs::create_directories(out);
  save_library(lib, out / "library.json");
  int adversarial = 0, excluded = 0;
  for (const auto& s : segments) {
    adversarial += s.label == SkillLabel::Adversarial;
    excluded += s.label == SkillLabel::Excluded;
  }
  write_run_manifest({"build-skills",
                      {{"seed", std::to_string(seed)}, {"clusters", std::to_string(clusters)},
                       {"horizon", std::to_string(horizon)}},
                      {demos / "rollouts.jsonl", demos / "scenarios.txt"},
                      {out / "library.json"}},
                     out);
  std::cout << segments.size() << " segments (" << adversarial << " adversarial, " << excluded << " excluded), "
            << lib.adversarial_prior.cells().size() << " adversarial prior cells\n";
  return 0;
}

int gen_corpus(const fs::path& scenarios, std::uint64_t seed, int threads, const fs::path& out) {
  const auto suite = load_suite(scenarios);
  std::vector<std::vector<CorpusEntry>> parts(suite.size());
  parallel_for(static_cast<int>(suite.size()), threads, [&](int i) {
    const auto& s = suite[static_cast<std::size_t>(i)];
    parts[static_cast<std::size_t>(i)] = oracle_corpus(s, mix_seed({seed, fnv1a(s.id)}));
  });
  std::vector<CorpusEntry> corpus;
  for (auto& p : parts) corpus.insert(corpus.end(), p.begin(), p.end());
  fs::create_directories(out);
  save_corpus(corpus, out / "corpus.jsonl");
  write_run_manifest({"gen-corpus", {{"seed", std::to_string(seed)}}, suite_files(scenarios), {out / "corpus.jsonl"}},
                     out);
  std::cout << "wrote " << corpus.size() << " scored triples\n";
  return 0;
}

int train_scorer_cmd(const fs::path& corpus_path, std::uint64_t seed, const ScorerTrainingOptions& opts,
                     const fs::path& out) {
  const auto corpus = load_corpus(corpus_path);
  const ScorerTrainingResult r = train_scorer(corpus, seed, opts);
  fs::create_directories(out);
  save_model(r.model, out / "model.json");
  nlohmann::json j;
  j["train_loss"] = r.train_loss;
  j["validation_loss"] = r.validation_loss;
  j["validation_scenarios"] = r.validation_scenarios;
  if (r.validation_scenarios.size() >= 1) {
    const ScorerFidelity f = scorer_fidelity(r.model, corpus, r.validation_scenarios);
    j["fidelity"] = {{"spearman", f.spearman}, {"top1", f.top1}, {"mae", f.mae}, {"scenarios", f.scenarios}};
    std::cout << "held-out spearman " << f.spearman << ", top-1 " << f.top1 << ", mae " << f.mae << '\n';
  }
  write_text(out / "training.json", j.dump(2) + "\n");
  write_run_manifest({"train-scorer",
                      {{"seed", std::to_string(seed)},
                       {"epochs", std::to_string(opts.epochs)},
                       {"batch", std::to_string(opts.batch_size)},
                       {"learning_rate", num(opts.learning_rate)},
                       {"validation_fraction", num(opts.validation_fraction)},
                       {"stride", std::to_string(opts.segment_stride)},
                       {"per_head_loss", opts.per_head_loss ? "1" : "0"}},
                      {corpus_path},
                      {out / "model.json", out / "training.json"}},
                     out);
  return 0;
}

int train_ego_cmd(const RunFlags& flags) {
  const RunConfig c = flags.resolve();
  const Models models = load_models(c);
  require_models(c, models);
  const auto suite = load_suite(c.scenarios);
  const TrainResult r = train_ego(suite, c, models);
  fs::create_directories(c.out_dir);
  write_text(c.out_dir / "params.json", params_json(r.params) + "\n");
  std::ostringstream log;
  log << "generation,perturb_probability,best_fitness,mean_fitness\n";
  for (const auto& g : r.log)
    log << g.generation << ',' << num(g.perturb_probability) << ',' << num(g.best_fitness) << ','
        << num(g.mean_fitness) << '\n';
  write_text(c.out_dir / "training_log.csv", log.str());
  write_text(c.out_dir / "config.txt", config_text(c, c.out_dir));
  auto inputs = suite_files(c.scenarios);
  for (const auto& p : model_inputs(c)) inputs.push_back(p);
  write_run_manifest({"train-ego", config_arguments(c), inputs,
                      {c.out_dir / "params.json", c.out_dir / "training_log.csv", c.out_dir / "config.txt"}},
                     c.out_dir);
  std::cout << "best fitness " << r.fitness << '\n';
  return 0;
}

int evaluate_cmd(const RunFlags& flags) {
  const RunConfig c = flags.resolve();
  const Models models = load_models(c);
  require_models(c, models);
  EgoBinding ego{c.ego, {}};
  if (c.ego == EgoKind::Trained) {
    if (c.ego_params_path.empty()) throw ConfigError("--ego trained needs --ego-params");
    ego.params = parse_params(read_text(c.ego_params_path));
  }
  const auto suite = load_suite(c.scenarios);
  std::string run_id = std::string(to_string(c.generator)) + "/" + c.ablation + "/" + std::string(to_string(c.ego));
  // trained egos are told apart by the directory holding their parameters
  if (c.ego == EgoKind::Trained) run_id += ":" + fs::absolute(c.ego_params_path).parent_path().filename().string();
  const EvaluationResult r = evaluate(suite, ego, c.generator, ablation_from_string(c.ablation), models, c.K, c.seed,
                                      c.threads, c.offset, run_id);
  fs::create_directories(c.out_dir);
  write_text(c.out_dir / "report.json", report_json(r.report) + "\n");
  write_text(c.out_dir / "episodes.csv", episodes_csv(r.final_rollouts, suite));
  std::ostringstream lines;
  for (const auto& roll : r.final_rollouts) lines << rollout_line(roll) << '\n';
  write_text(c.out_dir / "rollouts.jsonl", lines.str());
  write_text(c.out_dir / "config.txt", config_text(c, c.out_dir));
  auto inputs = suite_files(c.scenarios);
  for (const auto& p : model_inputs(c)) inputs.push_back(p);
  write_run_manifest({"evaluate", config_arguments(c), inputs,
                      {c.out_dir / "report.json", c.out_dir / "episodes.csv", c.out_dir / "rollouts.jsonl",
                       c.out_dir / "config.txt"}},
                     c.out_dir);
  const auto& rep = r.report;
  std::cout << run_id << ": success " << rep.rates.success << ", crash " << rep.rates.crash << ", offroad "
            << rep.rates.offroad << ", realism " << rep.realism_mean << ", collision velocity "
            << rep.collision.mean_velocity << '\n';
  return 0;
}

int report_cmd(const std::vector<std::string>& runs, const fs::path& out) {
  std::ostringstream csv;
  csv << "run_id,n_episodes,success,crash,offroad,timeout,yaw_wd,acc_wd,road_wd,realism,collision_velocity,head_on,"
         "severe_head_on\n";
  std::vector<fs::path> inputs;
  for (const auto& run : runs) {
    const fs::path p = fs::is_directory(run) ? fs::path(run) / "report.json" : fs::path(run);
    const MetricsReport r = parse_report(read_text(p));
    inputs.push_back(p);
    csv << r.run_id << ',' << r.n_episodes << ',' << num(r.rates.success) << ',' << num(r.rates.crash) << ','
        << num(r.rates.offroad) << ',' << num(r.rates.timeout) << ',' << num(r.realism.yaw) << ','
        << num(r.realism.acc) << ',' << num(r.realism.road) << ',' << num(r.realism_mean) << ','
        << num(r.collision.mean_velocity) << ',' << num(r.collision.head_on_rate) << ','
        << num(r.collision.severe_head_on_rate) << '\n';
  }
  if (out.empty()) {
    std::cout << csv.str();
    return 0;
  }
  fs::create_directories(out);
  write_text(out / "summary.csv", csv.str());
  write_run_manifest({"report", {}, inputs, {out / "summary.csv"}}, out);
  std::cout << "wrote " << (out / "summary.csv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seal: learned adversarial scenario perturbation"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  int count = 250, rounds = 2, clusters = kDefaultClusters, horizon = kSkillHorizon, threads = 0;
  double train_fraction = 0.8;
  std::string out, scenarios, demos, corpus;
  std::vector<std::string> runs;
  ScorerTrainingOptions scorer_opts;

  auto* gen = app.add_subcommand("gen-scenarios", "synthetic base scenarios with train/eval manifests");
  gen->add_option("--seed", seed);
  gen->add_option("--count", count);
  gen->add_option("--train-fraction", train_fraction);
  gen->add_option("--out", out)->required();

  auto* demo = app.add_subcommand("collect-demos", "IDM demonstration roll-outs for the skill library");
  demo->add_option("--scenarios", scenarios)->required();
  demo->add_option("--seed", seed);
  demo->add_option("--rounds", rounds, "jittered passes over the scenarios");
  demo->add_option("--out", out)->required();

  auto* skills = app.add_subcommand("build-skills", "segment, label and cluster demonstrations");
  skills->add_option("--corpus", demos, "collect-demos output directory")->required();
  skills->add_option("--clusters", clusters);
  skills->add_option("--horizon", horizon);
  skills->add_option("--seed", seed);
  skills->add_option("--out", out)->required();

  auto* gcorpus = app.add_subcommand("gen-corpus", "oracle-scored (history, candidate) triples");
  gcorpus->add_option("--scenarios", scenarios)->required();
  gcorpus->add_option("--seed", seed);
  gcorpus->add_option("--threads", threads);
  gcorpus->add_option("--out", out)->required();

  auto* tscorer = app.add_subcommand("train-scorer", "fit the criticality scorer");
  tscorer->add_option("--corpus", corpus)->required();
  tscorer->add_option("--seed", seed);
  tscorer->add_option("--epochs", scorer_opts.epochs);
  tscorer->add_option("--batch", scorer_opts.batch_size);
  tscorer->add_option("--lr", scorer_opts.learning_rate);
  tscorer->add_option("--stride", scorer_opts.segment_stride);
  tscorer->add_flag("--per-head-loss", scorer_opts.per_head_loss);
  tscorer->add_option("--out", out)->required();

  RunFlags train_flags, eval_flags;
  auto* tego = app.add_subcommand("train-ego", "cross-entropy search for the ego controller");
  train_flags.add(tego, true);
  auto* ev = app.add_subcommand("evaluate", "K-step perturbation evaluation");
  eval_flags.add(ev, false);

  auto* rep = app.add_subcommand("report", "tabulate report.json files as CSV");
  rep->add_option("runs", runs, "run directories or report files")->required();
  rep->add_option("--out", out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) return gen_scenarios(seed, count, train_fraction, out);
    if (*demo) return collect_demos(scenarios, seed, rounds, out);
    if (*skills) return build_skills(demos, clusters, horizon, seed, out);
    if (*gcorpus) return gen_corpus(scenarios, seed, threads, out);
    if (*tscorer) return train_scorer_cmd(corpus, seed, scorer_opts, out);
    if (*tego) return train_ego_cmd(train_flags);
    if (*ev) return evaluate_cmd(eval_flags);
    if (*rep) return report_cmd(runs, out);
  } catch (const seal::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
