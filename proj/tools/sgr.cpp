// sgr: command-line front end for feature extraction, training, scoring,
// evaluation and synthetic distortion.

#include <CLI11.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sgr/distortion.hpp"
#include "sgr/evaluation.hpp"
#include "sgr/forest.hpp"
#include "sgr/pipeline.hpp"
#include "sgr/ply.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kDataError = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw sgr::Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw sgr::Error("cannot write '" + path + "'");
  out << bytes;
  if (!out) throw sgr::Error("write failed for '" + path + "'");
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0;
  const std::string t = trim(s);
  auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size())
    throw sgr::Error(where + ": '" + s + "' is not a number");
  return v;
}

// ---------------------------------------------------------------- config

/// Pipeline flags shared by `features` and `score`. Values given on the
/// command line win over values read from --config.
struct ConfigFlags {
  std::optional<std::size_t> k_graph, filter_len, theta, k_normal, k_sim, window;
  std::optional<std::string> alpha_mode, angular_pooling, resample_signal, groups;
  std::optional<std::uint64_t> seed;
  bool centered_geometry = false;
  bool use_file_normals = false;
  std::string config_path;
  unsigned threads = 1;
  bool verbose = false;

  void attach(CLI::App* app) {
    app->add_option("--k-graph", k_graph, "neighbours per node of the k-NN graph");
    app->add_option("--filter-len", filter_len, "graph filter length K");
    app->add_option("--theta", theta, "number of keypoints (default M/10000)");
    app->add_option("--k-normal", k_normal, "neighbours for normal estimation");
    app->add_option("--k-sim", k_sim, "neighbours for angular similarity");
    app->add_option("--window", window, "MSCN neighbourhood size");
    app->add_option("--alpha-mode", alpha_mode, "literal | squared");
    app->add_option("--angular-pooling", angular_pooling, "literal | per-point");
    app->add_option("--resample-signal", resample_signal,
                    "normal | geometry | color");
    app->add_option("--groups", groups,
                    "comma list of feature groups to compute (geometry,color,angular)");
    app->add_option("--seed", seed, "seed recorded with the configuration");
    app->add_flag("--centered-geometry", centered_geometry,
                  "geometry features relative to each keypoint");
    app->add_flag("--use-file-normals", use_file_normals,
                  "use normals stored in the PLY instead of estimating");
    app->add_option("--config", config_path, "key=value configuration file");
    app->add_option("--threads", threads, "worker threads (0 = all cores)");
    app->add_flag("--verbose", verbose, "echo the effective configuration");
  }
};

sgr::AlphaMode parse_alpha(const std::string& s) {
  if (s == "literal") return sgr::AlphaMode::literal;
  if (s == "squared") return sgr::AlphaMode::squared;
  throw UsageError("alpha-mode must be literal or squared, got '" + s + "'");
}

sgr::AngularPooling parse_pooling(const std::string& s) {
  if (s == "literal") return sgr::AngularPooling::literal;
  if (s == "per-point") return sgr::AngularPooling::per_point;
  throw UsageError("angular-pooling must be literal or per-point, got '" + s + "'");
}

sgr::ResampleSignal parse_signal(const std::string& s) {
  if (s == "normal") return sgr::ResampleSignal::normal;
  if (s == "geometry") return sgr::ResampleSignal::geometry;
  if (s == "color") return sgr::ResampleSignal::color;
  throw UsageError("resample-signal must be normal, geometry or color, got '" + s + "'");
}

void parse_groups(sgr::PipelineConfig& c, const std::string& s) {
  c.geometry_group = c.color_group = c.angular_group = false;
  std::istringstream in(s);
  for (std::string g; std::getline(in, g, ',');) {
    g = trim(g);
    if (g == "geometry") c.geometry_group = true;
    else if (g == "color") c.color_group = true;
    else if (g == "angular") c.angular_group = true;
    else throw UsageError("groups: unknown feature group '" + g + "'");
  }
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const std::string t = trim(v);
  auto r = std::from_chars(t.data(), t.data() + t.size(), out);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size())
    throw UsageError("config: " + key + " expects a non-negative integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "1" || t == "true" || t == "yes") return true;
  if (t == "0" || t == "false" || t == "no") return false;
  throw UsageError("config: " + key + " expects true or false, got '" + v + "'");
}

void apply_key(sgr::PipelineConfig& c, const std::string& key, const std::string& v) {
  if (key == "k-graph") c.k_graph = parse_count(key, v);
  else if (key == "filter-len") c.filter_length = parse_count(key, v);
  else if (key == "theta") c.theta_override = parse_count(key, v);
  else if (key == "k-normal") c.k_normal = parse_count(key, v);
  else if (key == "k-sim") c.k_sim = parse_count(key, v);
  else if (key == "window") c.window = parse_count(key, v);
  else if (key == "alpha-mode") c.alpha_mode = parse_alpha(trim(v));
  else if (key == "angular-pooling") c.angular_pooling = parse_pooling(trim(v));
  else if (key == "resample-signal") c.resample_signal = parse_signal(trim(v));
  else if (key == "groups") parse_groups(c, v);
  else if (key == "seed") c.seed = parse_count(key, v);
  else if (key == "centered-geometry") c.centered_geometry = parse_bool(key, v);
  else if (key == "use-file-normals") c.use_file_normals = parse_bool(key, v);
  else if (key == "threads") c.threads = unsigned(parse_count(key, v));
  else throw UsageError("config: unknown key '" + key + "'");
}

void load_config_file(sgr::PipelineConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw UsageError(path + ":" + std::to_string(n) + ": expected key=value");
    std::string key = trim(t.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    apply_key(c, key, t.substr(eq + 1));
  }
}

std::string describe(const sgr::PipelineConfig& c) {
  std::ostringstream s;
  s << "k-graph=" << c.k_graph << "\nfilter-len=" << c.filter_length
    << "\ntheta=" << (c.theta_override ? std::to_string(*c.theta_override) : "auto")
    << "\nk-normal=" << c.k_normal << "\nk-sim=" << c.k_sim
    << "\nwindow=" << c.window << "\nalpha-mode="
    << (c.alpha_mode == sgr::AlphaMode::literal ? "literal" : "squared")
    << "\ncentered-geometry=" << (c.centered_geometry ? "true" : "false")
    << "\nangular-pooling="
    << (c.angular_pooling == sgr::AngularPooling::literal ? "literal" : "per-point")
    << "\nresample-signal="
    << (c.resample_signal == sgr::ResampleSignal::normal     ? "normal"
        : c.resample_signal == sgr::ResampleSignal::geometry ? "geometry"
                                                             : "color")
    << "\ngroups=" << (c.geometry_group ? "geometry," : "")
    << (c.color_group ? "color," : "") << (c.angular_group ? "angular" : "")
    << "\nseed=" << c.seed
    << "\nuse-file-normals=" << (c.use_file_normals ? "true" : "false")
    << "\nthreads=" << c.threads << "\n";
  return s.str();
}

sgr::PipelineConfig effective_config(const ConfigFlags& f) {
  sgr::PipelineConfig c;
  if (!f.config_path.empty()) load_config_file(c, f.config_path);
  if (f.k_graph) c.k_graph = *f.k_graph;
  if (f.filter_len) c.filter_length = *f.filter_len;
  if (f.theta) c.theta_override = *f.theta;
  if (f.k_normal) c.k_normal = *f.k_normal;
  if (f.k_sim) c.k_sim = *f.k_sim;
  if (f.window) c.window = *f.window;
  if (f.alpha_mode) c.alpha_mode = parse_alpha(*f.alpha_mode);
  if (f.angular_pooling) c.angular_pooling = parse_pooling(*f.angular_pooling);
  if (f.resample_signal) c.resample_signal = parse_signal(*f.resample_signal);
  if (f.groups) parse_groups(c, *f.groups);
  if (f.seed) c.seed = *f.seed;
  if (f.centered_geometry) c.centered_geometry = true;
  if (f.use_file_normals) c.use_file_normals = true;
  if (f.threads != 1) c.threads = f.threads;
  try {
    c.validate();
  } catch (const sgr::Error& e) {
    throw UsageError(e.what());
  }
  if (f.verbose) std::cerr << "effective configuration:\n" << describe(c);
  return c;
}

/// --config / --verbose for subcommands whose options map one-to-one onto
/// file keys. File values fill only options absent from the command line.
struct FileDefaults {
  std::string path;
  bool verbose = false;

  void attach(CLI::App* app) {
    app->option_defaults()->always_capture_default();
    app->add_option("--config", path, "key=value configuration file");
    app->add_flag("--verbose", verbose, "echo the effective configuration");
  }

  void apply(CLI::App* app) const {
    if (!path.empty()) {
      std::ifstream in(path);
      if (!in) throw UsageError("cannot open config file '" + path + "'");
      std::string line;
      for (int n = 1; std::getline(in, line); ++n) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
          throw UsageError(path + ":" + std::to_string(n) + ": expected key=value");
        std::string key = trim(t.substr(0, eq));
        std::replace(key.begin(), key.end(), '_', '-');
        CLI::Option* opt = app->get_option_no_throw("--" + key);
        if (!opt || key == "config" || key == "verbose")
          throw UsageError("config: unknown key '" + key + "'");
        if (opt->count() > 0) continue;
        opt->add_result(trim(t.substr(eq + 1)));
        try {
          opt->run_callback();
        } catch (const CLI::ParseError& e) {
          throw UsageError("config: " + key + ": " + e.what());
        }
      }
    }
    if (verbose) {
      std::cerr << "effective configuration:\n";
      for (const CLI::Option* opt : app->get_options()) {
        const std::string name = opt->get_single_name();
        if (opt->get_lnames().empty() || name == "help" || name == "config" ||
            name == "verbose")
          continue;
        std::string value = opt->get_default_str();
        if (opt->count() > 0) {
          value.clear();
          for (const auto& r : opt->results()) value += (value.empty() ? "" : " ") + r;
        }
        if (value.empty() && opt->get_expected_min() == 0) value = "false";
        std::cerr << name << "=" << value << "\n";
      }
    }
  }
};

// ---------------------------------------------------------- extraction

struct Extracted {
  std::string id;
  std::optional<sgr::FeatureVector> features;
  std::string error;
};

std::string cloud_id(const std::string& path) { return fs::path(path).stem().string(); }

/// Extracts every input; files run in parallel, each with a single-threaded
/// pipeline, unless there is only one file.
std::vector<Extracted> extract_all(const std::vector<std::string>& inputs,
                                   const sgr::PipelineConfig& config) {
  std::vector<Extracted> out(inputs.size());
  const unsigned threads = sgr::resolve_threads(config.threads);
  sgr::PipelineConfig per_file = config;
  if (inputs.size() > 1) per_file.threads = 1;
  sgr::parallel_for(inputs.size(), inputs.size() > 1 ? threads : 1,
                    [&](std::size_t b, std::size_t e) {
                      for (std::size_t i = b; i < e; ++i) {
                        out[i].id = cloud_id(inputs[i]);
                        try {
                          const sgr::PointCloud cloud = sgr::load_ply(read_file(inputs[i]));
                          out[i].features = sgr::extract_features(cloud, per_file);
                        } catch (const std::exception& ex) {
                          out[i].error = ex.what();
                        }
                      }
                    });
  return out;
}

// -------------------------------------------------------------- tables

struct FeatureTable {
  std::vector<std::string> ids;
  sgr::FeatureMatrix x;
};

FeatureTable read_feature_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw sgr::Error(path + ": empty feature file");
  const auto header = split(trim(line), ',');
  if (header.size() != sgr::kFeatureCount + 2 || header.front() != "id")
    throw sgr::Error(path + ": expected header id,f00..f39,warnings");
  FeatureTable t;
  t.x.cols = sgr::kFeatureCount;
  for (int n = 2; std::getline(in, line); ++n) {
    if (trim(line).empty()) continue;
    const auto cells = split(trim(line), ',');
    if (cells.size() != header.size())
      throw sgr::Error(path + ":" + std::to_string(n) + ": expected " +
                       std::to_string(header.size()) + " columns");
    std::vector<double> row;
    for (std::size_t c = 1; c <= sgr::kFeatureCount; ++c)
      row.push_back(parse_double(cells[c], path + ":" + std::to_string(n)));
    t.ids.push_back(cells[0]);
    t.x.push_row(row);
  }
  return t;
}

struct MosTable {
  std::map<std::string, double> mos;
  std::map<std::string, std::string> group;
};

MosTable read_mos_csv(const std::string& path, const std::string& group_by) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw sgr::Error(path + ": empty MOS file");
  const auto header = split(trim(line), ',');
  const auto col = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (trim(header[i]) == name) return i;
    return std::nullopt;
  };
  const auto id_col = col("id"), mos_col = col("mos");
  if (!id_col || !mos_col) throw sgr::Error(path + ": header must contain id and mos");
  std::optional<std::size_t> group_col;
  if (!group_by.empty()) {
    group_col = col(group_by);
    if (!group_col) throw UsageError(path + ": no column named '" + group_by + "'");
  }
  MosTable t;
  for (int n = 2; std::getline(in, line); ++n) {
    if (trim(line).empty()) continue;
    const auto cells = split(trim(line), ',');
    if (cells.size() != header.size())
      throw sgr::Error(path + ":" + std::to_string(n) + ": column count mismatch");
    const std::string id = trim(cells[*id_col]);
    if (!t.mos.emplace(id, parse_double(cells[*mos_col], path)).second)
      throw sgr::Error(path + ": duplicate id '" + id + "'");
    if (group_col) t.group[id] = trim(cells[*group_col]);
  }
  return t;
}

struct Joined {
  sgr::FeatureMatrix x;
  std::vector<double> y;
  std::vector<std::string> groups;
};

Joined join(const FeatureTable& f, const MosTable& m) {
  std::vector<std::string> missing;
  std::map<std::string, int> seen;
  for (const auto& id : f.ids) {
    if (++seen[id] == 2) throw sgr::Error("duplicate feature id '" + id + "'");
    if (!m.mos.count(id)) missing.push_back(id + " (no MOS)");
  }
  for (const auto& [id, v] : m.mos)
    if (!seen.count(id)) missing.push_back(id + " (no features)");
  if (!missing.empty()) {
    std::string msg = "ids do not join 1:1; unmatched:";
    for (const auto& s : missing) msg += "\n  " + s;
    throw sgr::Error(msg);
  }
  Joined j;
  j.x.cols = f.x.cols;
  for (std::size_t i = 0; i < f.ids.size(); ++i) {
    j.x.push_row(f.x.row(i));
    j.y.push_back(m.mos.at(f.ids[i]));
    if (!m.group.empty()) j.groups.push_back(m.group.at(f.ids[i]));
  }
  return j;
}

struct ForestFlags {
  std::size_t trees = 100, mtry = 13, min_leaf = 2;
  bool no_bootstrap = false;
  unsigned threads = 1;

  void attach(CLI::App* app) {
    app->add_option("--trees", trees, "number of trees")->check(CLI::PositiveNumber);
    app->add_option("--mtry", mtry, "features drawn per split")->check(CLI::PositiveNumber);
    app->add_option("--min-leaf", min_leaf, "minimum samples per leaf")
        ->check(CLI::PositiveNumber);
    app->add_flag("--no-bootstrap", no_bootstrap, "train every tree on all rows");
    app->add_option("--threads", threads, "worker threads (0 = all cores)");
  }
  sgr::ForestParams params() const {
    sgr::ForestParams p;
    p.n_trees = trees;
    p.mtry = mtry;
    p.min_leaf = min_leaf;
    p.bootstrap = !no_bootstrap;
    p.threads = threads;
    return p;
  }
};

// ------------------------------------------------------------ commands

int cmd_features(const std::vector<std::string>& inputs, const ConfigFlags& flags,
                 const std::string& out_path, bool keep_going) {
  const auto config = effective_config(flags);
  const auto results = extract_all(inputs, config);
  std::ostringstream csv;
  csv << "id";
  for (std::size_t i = 0; i < sgr::kFeatureCount; ++i)
    csv << ",f" << (i < 10 ? "0" : "") << i;
  csv << ",warnings\n";
  bool failed = false;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    if (!r.features) {
      std::cerr << (keep_going ? "warning: " : "error: ") << inputs[i] << ": "
                << r.error << "\n";
      failed = true;
      continue;
    }
    csv << r.id;
    for (double v : r.features->values) csv << ',' << fmt(v);
    csv << ',' << r.features->diagnostics.warnings.size() << "\n";
    if (flags.verbose)
      for (const auto& w : r.features->diagnostics.warnings)
        std::cerr << r.id << ": " << w << "\n";
  }
  if (out_path.empty() || out_path == "-") std::cout << csv.str();
  else write_file(out_path, csv.str());
  return failed && !keep_going ? kDataError : kOk;
}

int cmd_train(const std::string& features, const std::string& mos,
              const std::string& model_out, std::uint64_t seed, const ForestFlags& ff) {
  const Joined j = join(read_feature_csv(features), read_mos_csv(mos, ""));
  if (j.y.size() < 10)
    throw sgr::Error("training needs at least 10 labelled clouds, got " +
                     std::to_string(j.y.size()));
  const auto model = sgr::train_forest(j.x, j.y, ff.params(), seed);
  write_file(model_out, sgr::save_model(model));
  double se = 0;
  for (std::size_t i = 0; i < j.y.size(); ++i) {
    const double d = sgr::predict(model, j.x.row(i)) - j.y[i];
    se += d * d;
  }
  std::cout << "trained " << model.trees.size() << " trees on N=" << j.y.size()
            << " (seed " << seed << ")\n"
            << "resubstitution RMSE " << fmt(std::sqrt(se / double(j.y.size())))
            << "\nmodel written to " << model_out << "\n";
  return kOk;
}

int cmd_score(const std::vector<std::string>& inputs, const std::string& model_path,
              const ConfigFlags& flags, bool keep_going) {
  if (!fs::exists(model_path)) throw UsageError("model file '" + model_path + "' not found");
  const auto model = sgr::load_model(read_file(model_path));
  const auto config = effective_config(flags);
  const auto results = extract_all(inputs, config);
  bool failed = false;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].features) {
      std::cerr << (keep_going ? "warning: " : "error: ") << inputs[i] << ": "
                << results[i].error << "\n";
      failed = true;
      continue;
    }
    std::cout << results[i].id << '\t'
              << fmt(sgr::predict(model, results[i].features->values)) << "\n";
  }
  return failed && !keep_going ? kDataError : kOk;
}

int cmd_eval(const std::string& features, const std::string& mos, double ratio,
             std::uint64_t seed, const std::string& group_by, const ForestFlags& ff) {
  if (!(ratio > 0.0 && ratio < 1.0))
    throw UsageError("--ratio must be strictly between 0 and 1 (the test fold cannot be empty)");
  const Joined j = join(read_feature_csv(features), read_mos_csv(mos, group_by));
  const auto rep = sgr::evaluate_split(j.x, j.y, ratio, seed, ff.params(),
                                       group_by.empty() ? nullptr : &j.groups);
  std::cout << "split seed " << rep.seed << "\n"
            << "train " << rep.n_train << "\n"
            << "test " << rep.n_test << "\n"
            << "SROCC " << fmt(rep.srocc) << "\n"
            << "KROCC " << fmt(rep.krocc) << "\n"
            << "PLCC " << (rep.plcc ? fmt(*rep.plcc) : "undefined (constant MOS)") << "\n";
  for (std::size_t b = 0; b < rep.betas.size(); ++b)
    std::cout << "beta" << b + 1 << " " << fmt(rep.betas[b]) << "\n";
  return kOk;
}

int cmd_distort(const std::string& input, const std::string& type, double level,
                std::uint64_t seed, const std::string& out, bool ascii) {
  if (type != "downsample" && type != "gnoise" && type != "cnoise")
    throw UsageError("unknown distortion type '" + type +
                     "' (expected downsample, gnoise or cnoise)");
  const sgr::PointCloud cloud = sgr::load_ply(read_file(input));
  sgr::PointCloud result;
  if (type == "downsample") result = sgr::downsample(cloud, level, seed);
  else if (type == "gnoise") result = sgr::geometry_noise(cloud, level, seed);
  else result = sgr::color_noise(cloud, level, seed);
  write_file(out, sgr::save_ply(result, ascii ? sgr::PlyEncoding::ascii
                                              : sgr::PlyEncoding::binary_le));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind point-cloud quality assessment"};
  app.require_subcommand(1);

  ConfigFlags feat_flags, score_flags;
  std::vector<std::string> feat_inputs, score_inputs;
  std::string feat_out, model_path;
  bool feat_keep = false, score_keep = false;
  auto* features = app.add_subcommand("features", "extract the 40 features of PLY files");
  features->add_option("inputs", feat_inputs, "PLY files")->required();
  features->add_option("-o,--out", feat_out, "CSV output path (default stdout)");
  features->add_flag("--keep-going", feat_keep, "report failing files as warnings");
  feat_flags.attach(features);

  std::string train_features, train_mos, train_out;
  std::uint64_t train_seed = 0;
  ForestFlags train_ff;
  auto* train = app.add_subcommand("train", "train a regressor from features and MOS");
  train->add_option("--features", train_features, "feature CSV")->required();
  train->add_option("--mos", train_mos, "MOS CSV with columns id,mos")->required();
  train->add_option("-o,--model", train_out, "model output path")->required();
  train->add_option("--seed", train_seed, "training seed");
  train_ff.attach(train);
  FileDefaults train_cfg;
  train_cfg.attach(train);

  auto* score = app.add_subcommand("score", "predict quality of PLY files");
  score->add_option("inputs", score_inputs, "PLY files")->required();
  score->add_option("-m,--model", model_path, "model file")->required();
  score->add_flag("--keep-going", score_keep, "report failing files as warnings");
  score_flags.attach(score);

  std::string eval_features, eval_mos, group_by;
  double ratio = 0.8;
  std::uint64_t eval_seed = 0;
  ForestFlags eval_ff;
  auto* eval = app.add_subcommand("eval", "train/test split evaluation");
  eval->add_option("--features", eval_features, "feature CSV")->required();
  eval->add_option("--mos", eval_mos, "MOS CSV with columns id,mos")->required();
  eval->add_option("--ratio", ratio, "training fraction");
  eval->add_option("--seed", eval_seed, "split and training seed");
  eval->add_option("--group-by", group_by, "MOS column whose groups stay in one fold");
  eval_ff.attach(eval);
  FileDefaults eval_cfg;
  eval_cfg.attach(eval);

  std::string dist_in, dist_type, dist_out;
  double level = 0;
  std::uint64_t dist_seed = 0;
  bool ascii = false;
  auto* distort = app.add_subcommand("distort", "apply a synthetic distortion");
  distort->add_option("input", dist_in, "input PLY")->required();
  distort->add_option("--type", dist_type, "downsample | gnoise | cnoise")->required();
  distort->add_option("--level", level, "keep fraction, noise % of diagonal, or colour sigma")
      ->required();
  distort->add_option("--seed", dist_seed, "generator seed");
  distort->add_option("-o,--out", dist_out, "output PLY")->required();
  distort->add_flag("--ascii", ascii, "write ASCII instead of binary");
  FileDefaults distort_cfg;
  distort_cfg.attach(distort);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*features) return cmd_features(feat_inputs, feat_flags, feat_out, feat_keep);
    if (*train) train_cfg.apply(train);
    if (*eval) eval_cfg.apply(eval);
    if (*distort) distort_cfg.apply(distort);
    if (*train) return cmd_train(train_features, train_mos, train_out, train_seed, train_ff);
    if (*score) return cmd_score(score_inputs, model_path, score_flags, score_keep);
    if (*eval) return cmd_eval(eval_features, eval_mos, ratio, eval_seed, group_by, eval_ff);
    if (*distort)
      return cmd_distort(dist_in, dist_type, level, dist_seed, dist_out, ascii);
  } catch (const UsageError& e) {
    std::cerr << "sgr: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "sgr: " << e.what() << "\n";
    return kDataError;
  }
  return kUsageError;
}
