#include "sampa/bench/experiment.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include "sampa/analysis.hpp"
#include "sampa/errors.hpp"
#include "sampa/format.hpp"

namespace sampa::bench {
namespace {

namespace fs = std::filesystem;

struct PairJob {
  const MethodEntry* method;
  std::uint64_t seed;
};

struct PairOutput {
  PairResult result;
  std::vector<TraceRow> rows;  ///< t, f, grad_norm, sim_time only
  std::vector<fs::path> extra_files;
};

RunConfig make_run_config(const ExperimentConfig& config, const MethodEntry& method, std::uint64_t seed,
                          const ProblemOracle& oracle) {
  RunConfig rc;
  rc.spec = method.spec;
  rc.T = config.T;
  rc.batch_size = config.batch_size;
  rc.seed = seed;
  rc.record_every = config.record_every;
  rc.audit = config.audit;
  rc.x0 = config.x0;
  rc.keep_iterates = config.analysis != Analysis::none;
  const ParamVector x0 = rc.x0 ? *rc.x0 : oracle.initial_point(seed);
  rc.schedule = config.schedule.resolve(oracle, x0, method.spec.rho, config.T);
  rc.validate(oracle);
  return rc;
}

std::string pair_stem(const MethodEntry& m, std::uint64_t seed) {
  return m.label + "_seed" + std::to_string(seed);
}

PairOutput run_pair(const ExperimentConfig& config, const PairJob& job) {
  PairOutput out;
  PairResult& r = out.result;
  r.label = job.method->label;
  r.method = job.method->spec.method;
  r.seed = job.seed;
  try {
    const auto oracle = config.problem.build();
    const RunConfig rc = make_run_config(config, *job.method, job.seed, *oracle);
    IterateTrace trace =
        config.mode == Mode::parallel ? run_parallel_two_workers(*oracle, rc) : run_serial(*oracle, rc);
    annotate_sim_time(trace, simulate_wall_clock(trace, config.timing, r.method));
    if (rc.keep_iterates) annotate_alignment(trace, grad_alignment(trace, *oracle));

    const std::string stem = pair_stem(*job.method, job.seed);
    const double rho = job.method->spec.rho;
    if (config.analysis == Analysis::descent || config.analysis == Analysis::bound) {
      const double L = oracle->lipschitz().value_or(estimate_trace_smoothness(trace, *oracle, job.seed));
      if (config.analysis == Analysis::descent) {
        const fs::path file = "descent_" + stem + ".csv";
        write_descent_csv(config.out_dir / file, descent_check(trace, *oracle, rho, L, 0.5));
        out.extra_files.push_back(file);
      } else {
        const ParamVector& x0 = trace.rows.front().x;
        const fs::path file = "bound_" + stem + ".csv";
        write_bound_csv(config.out_dir / file, theorem_bound(trace, *oracle, rho, L, initial_gap(*oracle, x0)));
        out.extra_files.push_back(file);
      }
    }

    r.trace_file = "trace_" + stem + ".csv";
    write_trace_csv(config.out_dir / r.trace_file, trace);
    const TraceRow& last = trace.rows.back();
    r.final_f = last.f;
    r.final_grad_norm = last.grad_norm;
    r.seq_grads = last.seq_grads_cum;
    r.total_grads = last.total_grads_cum;
    r.sim_time = last.sim_time_cum;
    r.ok = true;
    out.rows.reserve(trace.rows.size());
    for (const TraceRow& row : trace.rows) {
      TraceRow slim;
      slim.t = row.t;
      slim.f = row.f;
      slim.grad_norm = row.grad_norm;
      slim.sim_time_cum = row.sim_time_cum;
      out.rows.push_back(std::move(slim));
    }
  } catch (const StepFailure& e) {
    r.error = e.what();
    r.failed_step = e.step();
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return out;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {std::nan(""), std::nan("")};
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

void write_plot_files(const ExperimentConfig& config, const std::vector<MethodEntry>& methods,
                      const std::vector<PairOutput>& outputs, std::vector<fs::path>& artifacts) {
  std::ofstream step_out(config.out_dir / "plot_vs_step.csv", std::ios::binary);
  std::ofstream time_out(config.out_dir / "plot_vs_time.csv", std::ios::binary);
  if (!step_out || !time_out) throw ConfigError("cannot write plot files in '" + config.out_dir.string() + "'");
  step_out << "step,method,f_mean,grad_norm_mean\n";
  time_out << "sim_time,method,f_mean,grad_norm_mean\n";
  for (const MethodEntry& m : methods) {
    std::vector<const PairOutput*> ok;
    for (const PairOutput& o : outputs) {
      if (o.result.label == m.label && o.result.ok) ok.push_back(&o);
    }
    if (ok.empty()) continue;
    const std::size_t n_rows = ok.front()->rows.size();
    for (std::size_t i = 0; i < n_rows; ++i) {
      double f = 0.0, g = 0.0, time = 0.0;
      for (const PairOutput* o : ok) {
        f += o->rows[i].f;
        g += o->rows[i].grad_norm;
        time += o->rows[i].sim_time_cum;
      }
      const double k = static_cast<double>(ok.size());
      const std::string tail = "," + m.label + "," + format_double(f / k) + "," + format_double(g / k) + "\n";
      step_out << ok.front()->rows[i].t << tail;
      time_out << format_double(time / k) << tail;
    }
  }
  artifacts.emplace_back("plot_vs_step.csv");
  artifacts.emplace_back("plot_vs_time.csv");
}

struct Collected {
  ExperimentResult result;
  std::vector<MethodEntry> methods;
};

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("output directory '" + dir.string() + "' is not writable: " + ec.message());
  const fs::path probe = dir / ".write_probe";
  {
    std::ofstream test(probe);
    if (!test) throw ConfigError("output directory '" + dir.string() + "' is not writable");
  }
  fs::remove(probe, ec);
}

Collected execute(const ExperimentConfig& config, std::size_t jobs) {
  config.validate();
  prepare_out_dir(config.out_dir);

  // Fail fast on configuration problems before any pair runs.
  {
    const auto oracle = config.problem.build();
    for (const MethodEntry& m : config.methods) {
      for (std::uint64_t seed : config.seeds) {
        try {
          (void)make_run_config(config, m, seed, *oracle);
        } catch (const ConfigError& e) {
          throw ConfigError("method '" + m.label + "', seed " + std::to_string(seed) + ": " + e.what());
        }
      }
    }
  }

  std::vector<PairJob> pair_jobs;
  for (const MethodEntry& m : config.methods) {
    for (std::uint64_t seed : config.seeds) pair_jobs.push_back({&m, seed});
  }
  std::vector<PairOutput> outputs(pair_jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < pair_jobs.size(); i = next++) outputs[i] = run_pair(config, pair_jobs[i]);
  };
  const std::size_t lanes = std::max<std::size_t>(1, std::min(jobs, pair_jobs.size()));
  if (lanes == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < lanes; ++k) pool.emplace_back(worker);
  }

  Collected c;
  c.methods = config.methods;
  ExperimentResult& res = c.result;
  res.config_hash = config_hash(config);
  for (PairOutput& o : outputs) {
    if (o.result.ok) res.artifacts.push_back(o.result.trace_file);
    for (auto& f : o.extra_files) res.artifacts.push_back(f);
    res.pairs.push_back(o.result);
  }
  res.summary = summarize(config.methods, res.pairs, config.timing, config.T);
  {
    std::ofstream out(config.out_dir / "summary.csv", std::ios::binary);
    if (!out) throw ConfigError("cannot write summary.csv");
    write_summary_csv(out, res.summary);
    res.artifacts.emplace_back("summary.csv");
  }
  write_plot_files(config, config.methods, outputs, res.artifacts);
  if (!res.all_ok()) {
    std::ofstream out(config.out_dir / "failures.csv", std::ios::binary);
    out << "method,seed,step,error\n";
    for (const PairResult& p : res.pairs) {
      if (p.ok) continue;
      std::string msg = p.error;
      for (char& ch : msg) {
        if (ch == ',' || ch == '\n') ch = ';';
      }
      out << p.label << ',' << p.seed << ',' << (p.failed_step ? std::to_string(*p.failed_step) : "") << ',' << msg
          << '\n';
    }
    res.artifacts.emplace_back("failures.csv");
  }
  {
    std::ofstream out(config.out_dir / "config.ini", std::ios::binary);
    out << to_config_text(config);
    res.artifacts.emplace_back("config.ini");
  }
  return c;
}

void write_manifest(const fs::path& dir, const ExperimentResult& res) {
  std::ofstream out(dir / "MANIFEST", std::ios::binary);
  if (!out) throw ConfigError("cannot write MANIFEST");
  out << "artifact,config_hash,bytes\n";
  for (const fs::path& a : res.artifacts) {
    std::error_code ec;
    const auto bytes = fs::file_size(dir / a, ec);
    out << a.generic_string() << ',' << res.config_hash << ',' << (ec ? 0 : bytes) << '\n';
  }
}

}  // namespace

const MethodSummary* ComparisonSummary::find(std::string_view label) const {
  for (const MethodSummary& m : methods) {
    if (m.label == label) return &m;
  }
  return nullptr;
}

bool ExperimentResult::all_ok() const {
  return std::all_of(pairs.begin(), pairs.end(), [](const PairResult& p) { return p.ok; });
}

ComparisonSummary summarize(const std::vector<MethodEntry>& methods, const std::vector<PairResult>& pairs,
                            const TimingModel& timing, std::size_t T) {
  ComparisonSummary summary;
  const double sam_time = (2.0 * timing.t_grad + timing.t_update) * static_cast<double>(T);
  for (const MethodEntry& m : methods) {
    MethodSummary s;
    s.label = m.label;
    s.method = m.spec.method;
    s.rho = m.spec.rho;
    s.lambda = m.spec.lambda;
    std::vector<double> f, g, seq, total, time;
    for (const PairResult& p : pairs) {
      if (p.label != m.label) continue;
      ++s.runs;
      if (!p.ok) {
        ++s.failures;
        continue;
      }
      f.push_back(p.final_f);
      g.push_back(p.final_grad_norm);
      seq.push_back(static_cast<double>(p.seq_grads));
      total.push_back(static_cast<double>(p.total_grads));
      time.push_back(p.sim_time);
    }
    std::tie(s.final_f_mean, s.final_f_std) = mean_std(f);
    std::tie(s.final_grad_norm_mean, s.final_grad_norm_std) = mean_std(g);
    s.seq_grads_mean = mean_std(seq).first;
    s.total_grads_mean = mean_std(total).first;
    s.sim_time_mean = mean_std(time).first;
    s.speedup_vs_sam = s.sim_time_mean > 0.0 && sam_time > 0.0 && timing.t_grad > 0.0 ? sam_time / s.sim_time_mean : 1.0;
    summary.methods.push_back(std::move(s));
  }
  return summary;
}

void write_summary_csv(std::ostream& out, const ComparisonSummary& summary) {
  out << "method,kind,rho,lambda,runs,failures,final_f_mean,final_f_std,final_grad_norm_mean,final_grad_norm_std,"
         "seq_grads_mean,total_grads_mean,sim_time_mean,speedup_vs_sam\n";
  for (const MethodSummary& s : summary.methods) {
    out << s.label << ',' << to_string(s.method) << ',' << format_double(s.rho) << ',' << format_double(s.lambda)
        << ',' << s.runs << ',' << s.failures << ',' << format_double(s.final_f_mean) << ','
        << format_double(s.final_f_std) << ',' << format_double(s.final_grad_norm_mean) << ','
        << format_double(s.final_grad_norm_std) << ',' << format_double(s.seq_grads_mean) << ','
        << format_double(s.total_grads_mean) << ',' << format_double(s.sim_time_mean) << ','
        << format_double(s.speedup_vs_sam) << '\n';
  }
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::size_t jobs) {
  Collected c = execute(config, jobs);
  write_manifest(config.out_dir, c.result);
  return std::move(c.result);
}

SweepResult lambda_sweep(const ExperimentConfig& config, const std::vector<double>& lambdas, std::size_t jobs) {
  if (lambdas.empty()) throw ConfigError("lambda sweep needs at least one lambda");
  for (double l : lambdas) {
    if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("sweep lambda " + format_double(l) + " outside [0, 1]");
  }
  MethodEntry tmpl;
  if (!config.methods.empty()) {
    tmpl = config.methods.front();
  } else {
    tmpl.spec.rho = default_rho(Method::sampa_lambda, kDefaultLambda);
  }
  tmpl.spec.method = Method::sampa_lambda;

  ExperimentConfig sweep = config;
  sweep.sweep_lambdas.clear();
  sweep.methods.clear();
  for (double l : lambdas) {
    MethodEntry m = tmpl;
    m.spec.lambda = l;
    m.label = "sampa_lambda_l" + format_double(l);
    sweep.methods.push_back(std::move(m));
  }
  Collected c = execute(sweep, jobs);
  SweepResult out;
  std::ofstream csv(config.out_dir / "lambda_sweep.csv", std::ios::binary);
  if (!csv) throw ConfigError("cannot write lambda_sweep.csv");
  csv << "lambda,method,runs,failures,final_f_mean,final_f_std,final_grad_norm_mean\n";
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const MethodSummary& s = c.result.summary.methods[i];
    out.points.push_back({lambdas[i], s});
    csv << format_double(lambdas[i]) << ',' << s.label << ',' << s.runs << ',' << s.failures << ','
        << format_double(s.final_f_mean) << ',' << format_double(s.final_f_std) << ','
        << format_double(s.final_grad_norm_mean) << '\n';
  }
  csv.close();
  c.result.artifacts.emplace_back("lambda_sweep.csv");
  write_manifest(config.out_dir, c.result);
  out.experiment = std::move(c.result);
  return out;
}

}  // namespace sampa::bench
