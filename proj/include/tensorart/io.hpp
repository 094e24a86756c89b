#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tensorart/art_model.hpp"
#include "tensorart/errors.hpp"
#include "tensorart/gibbs.hpp"
#include "tensorart/irf.hpp"

namespace tensorart {

using nlohmann::json;

// ---------------------------------------------------------------------------
// low-level helpers
// ---------------------------------------------------------------------------

/// Shortest round-trip decimal rendering of a double.
inline std::string format_double(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

/// Atomic text write: temp file in the target directory, then rename.
inline void atomic_write_text(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path dir = path.parent_path();
  if (dir.empty()) dir = ".";
  std::filesystem::create_directories(dir);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open for writing: " + tmp.string());
    out << content;
    if (!out.flush()) throw ValidationError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

inline json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline Vector vector_from_json(const json& arr) {
  if (!arr.is_array()) throw ValidationError("expected a JSON array of numbers");
  Vector v(static_cast<Index>(arr.size()));
  Index k = 0;
  for (const auto& x : arr) {
    if (!x.is_number()) throw ValidationError("expected a JSON array of numbers");
    v[k++] = x.get<double>();
  }
  return v;
}

inline json matrix_to_json(const Matrix& m) {
  // column-major flat with explicit row count
  json out;
  out["rows"] = m.rows();
  out["cols"] = m.cols();
  json arr = json::array();
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) arr.push_back(m(i, j));
  out["data"] = arr;
  return out;
}

inline Matrix matrix_from_json(const json& obj) {
  const Index rows = obj.at("rows").get<Index>();
  const Index cols = obj.at("cols").get<Index>();
  const auto& arr = obj.at("data");
  if (static_cast<Index>(arr.size()) != rows * cols)
    throw ValidationError("matrix data length mismatch");
  Matrix m(rows, cols);
  Index k = 0;
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = arr[static_cast<std::size_t>(k++)].get<double>();
  return m;
}

inline std::vector<Index> dims_from_json(const json& arr) {
  if (!arr.is_array() || arr.empty()) throw ValidationError("dims must be a nonempty array");
  std::vector<Index> dims;
  for (const auto& d : arr) {
    if (!d.is_number_integer() || d.get<Index>() <= 0)
      throw ValidationError("dims must be positive integers");
    dims.push_back(d.get<Index>());
  }
  return dims;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// tensor series files
// ---------------------------------------------------------------------------

enum class SeriesFormat { csv_long, ndjson };

inline SeriesFormat series_format_from_string(const std::string& s) {
  if (s == "csv_long") return SeriesFormat::csv_long;
  if (s == "ndjson") return SeriesFormat::ndjson;
  throw ValidationError("unknown series format: " + s + " (expected csv_long or ndjson)");
}

/// csv_long: header "t,i1,...,iN,value", one dense cell per row, 1-based
/// indices. Rows may arrive in any order; observations are sorted by t.
inline std::string series_to_csv(const TensorSeries& series) {
  series.validate();
  std::ostringstream out;
  out << "t";
  for (std::size_t j = 0; j < series.dims.size(); ++j) out << ",i" << (j + 1);
  out << ",value\n";
  for (Index t = 0; t < series.length(); ++t) {
    const Tensor& y = series.obs[static_cast<std::size_t>(t)];
    for (Index k = 0; k < y.size(); ++k) {
      const auto idx = y.multi_index(k);
      out << (t + 1);
      for (Index i : idx) out << ',' << (i + 1);
      out << ',' << format_double(y[k]) << '\n';
    }
  }
  return out.str();
}

inline TensorSeries series_from_csv(const std::string& text, const std::vector<Index>& dims) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("csv: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::ostringstream expected;
  expected << "t";
  for (std::size_t j = 0; j < dims.size(); ++j) expected << ",i" << (j + 1);
  expected << ",value";
  if (line != expected.str())
    throw ValidationError("csv: header mismatch, expected '" + expected.str() + "', got '" +
                          line + "'");

  const Index istar = product_of(dims);
  std::map<long, Tensor> frames;
  std::map<long, std::vector<char>> seen;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != dims.size() + 2)
      throw ValidationError("csv line " + std::to_string(line_no) + ": expected " +
                            std::to_string(dims.size() + 2) + " fields");

    auto parse_long = [&](const std::string& s, const char* what) {
      long v = 0;
      auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ValidationError("csv line " + std::to_string(line_no) + ": non-integer " + what +
                              " '" + s + "'");
      return v;
    };
    const long t = parse_long(fields[0], "time index");
    if (t < 1) throw ValidationError("csv line " + std::to_string(line_no) + ": t must be >= 1");
    std::vector<Index> idx(dims.size());
    for (std::size_t j = 0; j < dims.size(); ++j) {
      const long i = parse_long(fields[j + 1], "cell index");
      if (i < 1 || i > dims[j])
        throw ValidationError("csv line " + std::to_string(line_no) + ": index i" +
                              std::to_string(j + 1) + " out of range");
      idx[j] = static_cast<Index>(i - 1);
    }
    double value = 0.0;
    {
      const std::string& s = fields.back();
      auto res = std::from_chars(s.data(), s.data() + s.size(), value);
      if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ValidationError("csv line " + std::to_string(line_no) + ": non-numeric value '" +
                              s + "'");
    }

    auto [it, fresh] = frames.try_emplace(t, dims);
    auto& mask = seen.try_emplace(t, static_cast<std::size_t>(istar), 0).first->second;
    const Index flat = it->second.flat_index(idx);
    if (mask[static_cast<std::size_t>(flat)])
      throw ValidationError("csv line " + std::to_string(line_no) + ": duplicate (t, index) row");
    mask[static_cast<std::size_t>(flat)] = 1;
    it->second[flat] = value;
  }

  TensorSeries series;
  series.dims = dims;
  for (auto& [t, mask] : seen) {
    for (Index k = 0; k < istar; ++k)
      if (!mask[static_cast<std::size_t>(k)])
        throw ValidationError("csv: missing cell at t=" + std::to_string(t) +
                              " (dense input required)");
    series.obs.push_back(std::move(frames.at(t)));
  }
  if (series.obs.empty()) throw ValidationError("csv: no observations");
  return series;
}

/// ndjson: one object {"t": k, "values": [flat vec]} per line.
inline std::string series_to_ndjson(const TensorSeries& series) {
  series.validate();
  std::ostringstream out;
  for (Index t = 0; t < series.length(); ++t) {
    json line;
    line["t"] = t + 1;
    line["values"] = detail::vector_to_json(series.obs[static_cast<std::size_t>(t)].flat());
    out << line.dump() << '\n';
  }
  return out.str();
}

inline TensorSeries series_from_ndjson(const std::string& text, const std::vector<Index>& dims) {
  std::istringstream in(text);
  std::string line;
  std::map<long, Tensor> frames;
  long line_no = 0;
  const Index istar = product_of(dims);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw ValidationError("ndjson line " + std::to_string(line_no) + ": " + e.what());
    }
    const long t = obj.at("t").get<long>();
    if (t < 1) throw ValidationError("ndjson line " + std::to_string(line_no) + ": t must be >= 1");
    if (frames.count(t))
      throw ValidationError("ndjson line " + std::to_string(line_no) + ": duplicate t");
    Vector v = detail::vector_from_json(obj.at("values"));
    if (v.size() != istar)
      throw ValidationError("ndjson line " + std::to_string(line_no) + ": expected " +
                            std::to_string(istar) + " values");
    frames.emplace(t, Tensor(dims, v));
  }
  if (frames.empty()) throw ValidationError("ndjson: no observations");
  TensorSeries series;
  series.dims = dims;
  for (auto& [t, frame] : frames) series.obs.push_back(std::move(frame));
  return series;
}

inline TensorSeries load_tensor_series(const std::filesystem::path& path, SeriesFormat format,
                                       const std::vector<Index>& dims) {
  const std::string text = read_text(path);
  return format == SeriesFormat::csv_long ? series_from_csv(text, dims)
                                          : series_from_ndjson(text, dims);
}

// ---------------------------------------------------------------------------
// model files
// ---------------------------------------------------------------------------

inline json model_to_json(const ArtModel& model) {
  model.validate();
  json out;
  out["schema_version"] = 1;
  out["type"] = "art_model";
  out["dims"] = model.dims;
  out["p"] = model.p;
  out["intercept"] = detail::vector_to_json(
      model.intercept.dims().empty() ? Vector::Zero(model.state_size()).eval()
                                     : model.intercept.flat());
  json coeffs = json::array();
  for (const auto& a : model.coeffs) coeffs.push_back(detail::vector_to_json(a.flat()));
  out["coefficients"] = coeffs;
  json covs = json::array();
  for (const auto& s : model.covs) covs.push_back(detail::matrix_to_json(s));
  out["covariances"] = covs;
  return out;
}

inline ArtModel model_from_json(const json& obj) {
  if (obj.value("type", "") != "art_model") throw ValidationError("not a model file");
  ArtModel m;
  m.dims = detail::dims_from_json(obj.at("dims"));
  m.p = obj.at("p").get<int>();
  m.intercept = Tensor(m.dims, detail::vector_from_json(obj.at("intercept")));
  std::vector<Index> cd = m.dims;
  cd.push_back(product_of(m.dims));
  for (const auto& c : obj.at("coefficients"))
    m.coeffs.emplace_back(cd, detail::vector_from_json(c));
  for (const auto& s : obj.at("covariances")) m.covs.push_back(detail::matrix_from_json(s));
  m.validate();
  return m;
}

inline void save_model(const std::filesystem::path& path, const ArtModel& model) {
  atomic_write_text(path, model_to_json(model).dump(2) + "\n");
}

inline ArtModel load_model(const std::filesystem::path& path) {
  try {
    return model_from_json(json::parse(read_text(path)));
  } catch (const json::exception& e) {
    throw ValidationError("model file " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// trace files (NDJSON: header line, then one draw per line)
// ---------------------------------------------------------------------------

inline std::string trace_to_ndjson(const Trace& trace) {
  std::ostringstream out;
  json header;
  header["schema_version"] = 1;
  header["type"] = "trace";
  header["dims"] = trace.dims;
  header["iterations"] = trace.iterations;
  header["burn_in"] = trace.burn_in;
  header["thin"] = trace.thin;
  header["seed"] = trace.seed;
  header["draw_count"] = trace.draws.size();
  out << header.dump() << '\n';
  for (const auto& draw : trace.draws) {
    json line;
    line["iteration"] = draw.iteration;
    line["coefficient"] = detail::vector_to_json(draw.coeff.flat());
    json sig = json::array();
    for (const auto& s : draw.sigma) sig.push_back(detail::matrix_to_json(s));
    line["sigma"] = sig;
    line["tau"] = draw.tau;
    line["gamma"] = draw.gamma;
    line["phi"] = detail::vector_to_json(draw.phi);
    out << line.dump() << '\n';
  }
  return out.str();
}

inline Trace trace_from_ndjson(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("trace: empty file");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("trace header: ") + e.what());
  }
  if (header.value("type", "") != "trace") throw ValidationError("not a trace file");
  Trace trace;
  trace.dims = detail::dims_from_json(header.at("dims"));
  trace.iterations = header.at("iterations").get<long>();
  trace.burn_in = header.at("burn_in").get<long>();
  trace.thin = header.at("thin").get<long>();
  trace.seed = header.at("seed").get<std::uint64_t>();

  std::vector<Index> cd = trace.dims;
  cd.push_back(product_of(trace.dims));
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw ValidationError("trace line " + std::to_string(line_no) + ": " + e.what());
    }
    TraceDraw draw;
    draw.iteration = obj.at("iteration").get<long>();
    draw.coeff = Tensor(cd, detail::vector_from_json(obj.at("coefficient")));
    for (const auto& s : obj.at("sigma")) draw.sigma.push_back(detail::matrix_from_json(s));
    draw.tau = obj.at("tau").get<double>();
    draw.gamma = obj.at("gamma").get<double>();
    draw.phi = detail::vector_from_json(obj.at("phi"));
    trace.draws.push_back(std::move(draw));
  }
  return trace;
}

inline void save_trace(const std::filesystem::path& path, const Trace& trace) {
  atomic_write_text(path, trace_to_ndjson(trace));
}

inline Trace load_trace(const std::filesystem::path& path) {
  return trace_from_ndjson(read_text(path));
}

// ---------------------------------------------------------------------------
// run configuration
// ---------------------------------------------------------------------------

struct SimulateConfig {
  Index T = 100;
  double rho_max = 0.95;
  double noise_scale = 1.0;
  double noise_correlation = 0.2;
};

struct IrfConfig {
  std::string trace_path;
  std::vector<std::vector<Index>> targets;  // 1-based multi-indices
  Vector delta;
  Index horizon = 8;
  std::vector<IrfMethod> methods{IrfMethod::oirf, IrfMethod::girf};
};

struct RunConfig {
  std::vector<Index> dims;
  int p = 1;
  Index rank = 1;
  PriorConfig prior;
  SamplerControls sampler;
  int chains = 1;
  std::string data_path;
  SeriesFormat data_format = SeriesFormat::csv_long;
  std::string out_dir = "out";
  SimulateConfig simulate;
  std::optional<IrfConfig> irf;

  /// Flat zero-based vec index of a 1-based multi-index.
  Index flat_target(const std::vector<Index>& multi) const {
    if (multi.size() != dims.size())
      throw ValidationError("shock target arity does not match dims");
    Index flat = 0, stride = 1;
    for (std::size_t j = 0; j < dims.size(); ++j) {
      if (multi[j] < 1 || multi[j] > dims[j])
        throw ValidationError("shock target index out of range");
      flat += (multi[j] - 1) * stride;
      stride *= dims[j];
    }
    return flat;
  }
};

inline RunConfig config_from_json(const json& obj) {
  RunConfig c;
  if (obj.value("schema_version", 0) != 1)
    throw ValidationError("config: unsupported or missing schema_version (expected 1)");
  c.dims = detail::dims_from_json(obj.at("dims"));
  c.p = obj.value("p", 1);
  if (c.p < 1) throw ValidationError("config: p must be >= 1");
  c.rank = obj.value("rank", Index{1});

  c.prior = PriorConfig::defaults(c.dims, c.rank);
  if (obj.contains("prior")) {
    const auto& pr = obj.at("prior");
    c.prior.alpha = pr.value("alpha", c.prior.alpha);
    // defaults tied to alpha and R unless pinned explicitly
    c.prior.a_tau = c.prior.alpha * static_cast<double>(c.rank);
    c.prior.b_tau = c.prior.alpha * std::pow(static_cast<double>(c.rank), 0.25);
    c.prior.a_tau = pr.value("a_tau", c.prior.a_tau);
    c.prior.b_tau = pr.value("b_tau", c.prior.b_tau);
    c.prior.a_lambda = pr.value("a_lambda", c.prior.a_lambda);
    c.prior.b_lambda = pr.value("b_lambda", c.prior.b_lambda);
    c.prior.a_gamma = pr.value("a_gamma", c.prior.a_gamma);
    c.prior.b_gamma = pr.value("b_gamma", c.prior.b_gamma);
    if (pr.contains("nu")) {
      c.prior.nu.clear();
      for (const auto& v : pr.at("nu")) c.prior.nu.push_back(v.get<double>());
    }
    if (pr.contains("psi_scale")) {
      const double s = pr.at("psi_scale").get<double>();
      if (s <= 0.0) throw ValidationError("config: psi_scale must be positive");
      for (auto& psi : c.prior.psi) psi *= s;
    }
  }

  if (obj.contains("sampler")) {
    const auto& sm = obj.at("sampler");
    c.sampler.iterations = sm.value("iterations", c.sampler.iterations);
    c.sampler.burn_in = sm.value("burn_in", c.sampler.burn_in);
    c.sampler.thin = sm.value("thin", c.sampler.thin);
    c.sampler.seed = sm.value("seed", c.sampler.seed);
    c.sampler.hmc_enabled = sm.value("hmc", c.sampler.hmc_enabled);
    c.chains = sm.value("chains", 1);
    if (c.chains < 1) throw ValidationError("config: chains must be >= 1");
  }
  c.sampler.validate();

  if (obj.contains("io")) {
    const auto& io = obj.at("io");
    c.data_path = io.value("data", "");
    c.data_format = series_format_from_string(io.value("format", "csv_long"));
    c.out_dir = io.value("out", c.out_dir);
  }

  if (obj.contains("simulate")) {
    const auto& sim = obj.at("simulate");
    c.simulate.T = sim.value("T", c.simulate.T);
    if (c.simulate.T < 2) throw ValidationError("config: simulate.T must be >= 2");
    c.simulate.rho_max = sim.value("rho_max", c.simulate.rho_max);
    if (c.simulate.rho_max <= 0.0 || c.simulate.rho_max >= 1.0)
      throw ValidationError("config: simulate.rho_max must lie in (0, 1)");
    c.simulate.noise_scale = sim.value("noise_scale", c.simulate.noise_scale);
    if (c.simulate.noise_scale <= 0.0)
      throw ValidationError("config: simulate.noise_scale must be positive");
    c.simulate.noise_correlation = sim.value("noise_correlation", c.simulate.noise_correlation);
    if (c.simulate.noise_correlation < 0.0 || c.simulate.noise_correlation >= 1.0)
      throw ValidationError("config: simulate.noise_correlation must lie in [0, 1)");
  }

  if (obj.contains("irf")) {
    const auto& ir = obj.at("irf");
    IrfConfig irf;
    irf.trace_path = ir.value("trace", "");
    if (!ir.contains("targets") || !ir.at("targets").is_array() || ir.at("targets").empty())
      throw ValidationError("config: irf.targets must be a nonempty array of multi-indices");
    for (const auto& t : ir.at("targets")) {
      std::vector<Index> multi;
      for (const auto& i : t) multi.push_back(i.get<Index>());
      irf.targets.push_back(multi);
    }
    if (ir.contains("delta"))
      irf.delta = detail::vector_from_json(ir.at("delta"));
    else
      irf.delta = Vector::Ones(static_cast<Index>(irf.targets.size()));
    irf.horizon = ir.value("horizon", irf.horizon);
    if (irf.horizon < 0) throw ValidationError("config: irf.horizon must be >= 0");
    if (ir.contains("methods")) {
      irf.methods.clear();
      for (const auto& m : ir.at("methods")) {
        const std::string name = m.get<std::string>();
        if (name == "oirf")
          irf.methods.push_back(IrfMethod::oirf);
        else if (name == "girf")
          irf.methods.push_back(IrfMethod::girf);
        else
          throw ValidationError("config: unknown irf method '" + name + "'");
      }
    }
    c.irf = std::move(irf);
  }

  c.prior.validate(c.dims);
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  try {
    return config_from_json(json::parse(read_text(path)));
  } catch (const json::exception& e) {
    throw ValidationError("config file " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// summary and IRF grid outputs
// ---------------------------------------------------------------------------

inline json summary_to_json(const PosteriorSummary& summary, const Trace& trace) {
  json out;
  out["schema_version"] = 1;
  out["type"] = "posterior_summary";
  out["dims"] = trace.dims;
  out["draw_count"] = trace.draws.size();
  out["seed"] = trace.seed;
  out["coefficient"] = {
      {"mean", detail::vector_to_json(summary.coeff.mean.flat())},
      {"median", detail::vector_to_json(summary.coeff.median.flat())},
      {"q05", detail::vector_to_json(summary.coeff.q05.flat())},
      {"q16", detail::vector_to_json(summary.coeff.q16.flat())},
      {"q84", detail::vector_to_json(summary.coeff.q84.flat())},
      {"q95", detail::vector_to_json(summary.coeff.q95.flat())},
  };
  json sig = json::array();
  for (const auto& s : summary.sigma_mean) sig.push_back(detail::matrix_to_json(s));
  out["sigma_mean_normalized"] = sig;
  out["rho_of_posterior_mean"] = summary.rho_of_mean;
  out["stationary_at_posterior_mean"] = summary.rho_of_mean < 1.0;
  json diag;
  for (const auto& [name, d] : summary.diagnostics)
    diag[name] = {{"ess", d.ess}, {"rhat", d.rhat}};
  out["diagnostics"] = diag;
  return out;
}

/// IRF grid CSV: method,h,i1..iN,response,q16,q84,q05,q95,significant with
/// one row per method x horizon x response cell.
inline std::string irf_grid_to_csv(const std::vector<IrfSummary>& summaries,
                                   const std::vector<Index>& dims, Index horizon) {
  std::ostringstream out;
  out << "method,h";
  for (std::size_t j = 0; j < dims.size(); ++j) out << ",i" << (j + 1);
  out << ",response,q16,q84,q05,q95,significant\n";
  const Tensor probe(dims);  // for index arithmetic
  for (const auto& s : summaries) {
    for (Index h = 0; h <= horizon; ++h) {
      for (Index k = 0; k < probe.size(); ++k) {
        const auto idx = probe.multi_index(k);
        out << irf_method_name(s.method) << ',' << h;
        for (Index i : idx) out << ',' << (i + 1);
        out << ',' << format_double(s.median(k, h)) << ',' << format_double(s.q16(k, h)) << ','
            << format_double(s.q84(k, h)) << ',' << format_double(s.q05(k, h)) << ','
            << format_double(s.q95(k, h)) << ',' << (s.significant(k, h) ? 1 : 0) << '\n';
      }
    }
  }
  return out.str();
}

}  // namespace tensorart
