#include "mmselab/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace mmselab {

namespace {

void check_keys(const YAML::Node& node, const std::set<std::string>& allowed, const std::string& where) {
  if (!node) return;
  if (!node.IsMap()) throw ConfigError(where + ": expected a mapping");
  for (const auto& kv : node) {
    auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
T get(const YAML::Node& node, const std::string& key, T fallback, const std::string& where) {
  if (!node || !node[key]) return fallback;
  try {
    return node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

KernelSpec parse_kernel(const YAML::Node& node, const std::string& where) {
  KernelSpec k;
  if (!node) return k;
  if (node.IsScalar()) {
    k.name = node.as<std::string>();
    return k;
  }
  check_keys(node, {"name", "flip", "sigma", "readout"}, where);
  k.name = get<std::string>(node, "name", k.name, where);
  k.flip = get<double>(node, "flip", k.flip, where);
  k.sigma = get<double>(node, "sigma", k.sigma, where);
  k.readout = get<std::vector<double>>(node, "readout", k.readout, where);
  return k;
}

PriorSpec parse_prior(const YAML::Node& node) {
  const std::string where = "prior";
  if (!node) return PriorSpec::rademacher(2);
  check_keys(node, {"kind", "K", "p_plus", "S", "support", "probs"}, where);
  auto kind = get<std::string>(node, "kind", "rademacher", where);
  int K = get<int>(node, "K", 1, where);
  if (K < 1) throw ConfigError("prior.K must be >= 1");
  try {
    if (kind == "rademacher") return PriorSpec::rademacher(K);
    if (kind == "binary") return PriorSpec::binary(K, get<double>(node, "p_plus", 0.5, where));
    if (kind == "uniform_box") return PriorSpec::uniform_box(K, get<double>(node, "S", 1.0, where));
    if (kind == "discrete") {
      auto support = get<std::vector<std::vector<double>>>(node, "support", {}, where);
      auto probs = get<std::vector<double>>(node, "probs", {}, where);
      std::vector<Vector> atoms;
      for (const auto& s : support) atoms.push_back(Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(s.size())));
      return PriorSpec::discrete(atoms, probs, get<double>(node, "S", 1.0, where));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("prior: ") + e.what());
  }
  throw ConfigError("prior.kind: unknown prior '" + kind + "'");
}

ModelSpec parse_model(const YAML::Node& model, const YAML::Node& prior) {
  const std::string where = "model";
  ModelSpec spec;
  spec.prior = parse_prior(prior);
  if (!model) {
    spec.base = SpikedTensorModel{2};
    return spec;
  }
  check_keys(model, {"variant", "order", "alpha", "kernel", "layers", "weights", "generative"}, where);
  auto variant = get<std::string>(model, "variant", "spiked_tensor", where);
  auto weights = get<std::string>(model, "weights", "gaussian", where);
  if (weights == "gaussian")
    spec.weights = WeightDist::Gaussian;
  else if (weights == "rademacher")
    spec.weights = WeightDist::Rademacher;
  else
    throw ConfigError("model.weights: expected gaussian or rademacher");

  if (variant == "none") {
    spec.base = NoBaseModel{};
  } else if (variant == "spiked_tensor") {
    spec.base = SpikedTensorModel{get<int>(model, "order", 2, where)};
  } else if (variant == "glm") {
    spec.base = GlmModel{get<double>(model, "alpha", 1.0, where), parse_kernel(model["kernel"], "model.kernel"), nullptr};
  } else if (variant == "committee") {
    spec.base = CommitteeModel{get<double>(model, "alpha", 1.0, where)};
  } else if (variant == "multilayer") {
    MultiLayerModel ml;
    if (!model["layers"] || !model["layers"].IsSequence()) throw ConfigError("model.layers: expected a list");
    for (std::size_t l = 0; l < model["layers"].size(); ++l) {
      const YAML::Node layer = model["layers"][l];
      std::string lw = "model.layers[" + std::to_string(l) + "]";
      check_keys(layer, {"ratio", "kernel"}, lw);
      ml.layers.push_back({get<double>(layer, "ratio", 1.0, lw), parse_kernel(layer["kernel"], lw + ".kernel"), nullptr});
    }
    spec.base = ml;
  } else {
    throw ConfigError("model.variant: unknown variant '" + variant + "'");
  }
  if (model["generative"]) {
    const YAML::Node g = model["generative"];
    check_keys(g, {"input_ratio", "kernel"}, "model.generative");
    spec.generative = GenerativePrior{get<double>(g, "input_ratio", 1.0, "model.generative"),
                                      parse_kernel(g["kernel"], "model.generative.kernel"), nullptr};
  }
  try {
    make_model(spec);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  return spec;
}

void emit_kernel(YAML::Emitter& out, const KernelSpec& k) {
  out << YAML::BeginMap << YAML::Key << "name" << YAML::Value << k.name << YAML::Key << "flip" << YAML::Value << k.flip
      << YAML::Key << "sigma" << YAML::Value << k.sigma;
  if (!k.readout.empty()) out << YAML::Key << "readout" << YAML::Value << YAML::Flow << k.readout;
  out << YAML::EndMap;
}

void emit_model(YAML::Emitter& out, const ModelSpec& spec) {
  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "weights" << YAML::Value << (spec.weights == WeightDist::Gaussian ? "gaussian" : "rademacher");
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, NoBaseModel>) {
          out << YAML::Key << "variant" << YAML::Value << "none";
        } else if constexpr (std::is_same_v<T, SpikedTensorModel>) {
          out << YAML::Key << "variant" << YAML::Value << "spiked_tensor" << YAML::Key << "order" << YAML::Value << m.order;
        } else if constexpr (std::is_same_v<T, GlmModel>) {
          out << YAML::Key << "variant" << YAML::Value << "glm" << YAML::Key << "alpha" << YAML::Value << m.alpha
              << YAML::Key << "kernel" << YAML::Value;
          emit_kernel(out, m.kernel);
        } else if constexpr (std::is_same_v<T, CommitteeModel>) {
          out << YAML::Key << "variant" << YAML::Value << "committee" << YAML::Key << "alpha" << YAML::Value << m.alpha;
        } else {
          out << YAML::Key << "variant" << YAML::Value << "multilayer" << YAML::Key << "layers" << YAML::Value
              << YAML::BeginSeq;
          for (const auto& l : m.layers) {
            out << YAML::BeginMap << YAML::Key << "ratio" << YAML::Value << l.ratio << YAML::Key << "kernel"
                << YAML::Value;
            emit_kernel(out, l.kernel);
            out << YAML::EndMap;
          }
          out << YAML::EndSeq;
        }
      },
      spec.base);
  if (spec.generative) {
    out << YAML::Key << "generative" << YAML::Value << YAML::BeginMap << YAML::Key << "input_ratio" << YAML::Value
        << spec.generative->input_ratio << YAML::Key << "kernel" << YAML::Value;
    emit_kernel(out, spec.generative->kernel);
    out << YAML::EndMap;
  }
  out << YAML::EndMap;

  const PriorSpec& p = spec.prior;
  out << YAML::Key << "prior" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "K" << YAML::Value << p.K() << YAML::Key << "S" << YAML::Value << p.S();
  if (p.is_discrete()) {
    out << YAML::Key << "kind" << YAML::Value << "discrete" << YAML::Key << "support" << YAML::Value << YAML::BeginSeq;
    for (int a = 0; a < p.support_size(); ++a) {
      std::vector<double> v(p.atom(a).data(), p.atom(a).data() + p.K());
      out << YAML::Flow << v;
    }
    out << YAML::EndSeq;
    std::vector<double> probs;
    for (int a = 0; a < p.support_size(); ++a) probs.push_back(p.prob(a));
    out << YAML::Key << "probs" << YAML::Value << YAML::Flow << probs;
  } else {
    out << YAML::Key << "kind" << YAML::Value << "uniform_box";
  }
  out << YAML::EndMap;
}

}  // namespace

IdentitySuiteConfig default_identity_suite() {
  IdentitySuiteConfig s;
  s.exact.push_back(CommitteeToy{3, 1, 1.0, 0.0, 1.0});
  s.exact.push_back(CommitteeToy{2, 2, 1.0, 0.0, 1.0});

  McIdentityEntry wigner;
  wigner.name = "spiked_wigner_side";
  wigner.model.prior = PriorSpec::rademacher(2);
  wigner.model.base = SpikedTensorModel{2};
  wigner.n = 3;
  wigner.snr_scale = 1.0;
  wigner.draws = 10000;
  s.mc.push_back(wigner);

  McIdentityEntry committee;
  committee.name = "noisy_committee_side";
  committee.model.prior = PriorSpec::rademacher(1);
  committee.model.weights = WeightDist::Rademacher;
  committee.model.base = GlmModel{1.0, KernelSpec{"committee", 0.1, 1.0, {}}, nullptr};
  committee.n = 3;
  committee.snr_scale = 1.0;
  committee.draws = 10000;
  s.mc.push_back(committee);

  McIdentityEntry control = committee;
  control.name = "tempered_noisy_committee";
  control.snr_scale = 0.0;
  control.temperature = 1.1;
  control.control = true;
  control.draws = 20000;
  s.mc.push_back(control);
  return s;
}

ExperimentConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  ExperimentConfig c;
  if (!root || root.IsNull()) throw ConfigError("config is empty");
  check_keys(root, {"model", "prior", "schedule", "sampler", "budget", "seed", "output", "identities", "free_energy", "mmse"},
             "config");
  c.model = parse_model(root["model"], root["prior"]);

  const YAML::Node sch = root["schedule"];
  check_keys(sch, {"n_grid", "s_n", "lambda_draws"}, "schedule");
  c.n_grid = get<std::vector<int>>(sch, "n_grid", c.n_grid, "schedule");
  c.lambda_draws = get<int>(sch, "lambda_draws", c.lambda_draws, "schedule");
  if (sch && sch["s_n"]) {
    const YAML::Node s = sch["s_n"];
    check_keys(s, {"coefficient", "exponent", "values"}, "schedule.s_n");
    c.s_n.coefficient = get<double>(s, "coefficient", c.s_n.coefficient, "schedule.s_n");
    c.s_n.exponent = get<double>(s, "exponent", c.s_n.exponent, "schedule.s_n");
    c.s_n.values = get<std::vector<double>>(s, "values", {}, "schedule.s_n");
  }

  const YAML::Node smp = root["sampler"];
  check_keys(smp, {"burn_in", "kept_sweeps", "thinning", "replicas", "initial_step", "target_acceptance", "backend",
                   "enumeration_cap"},
             "sampler");
  c.chain.burn_in = get<int>(smp, "burn_in", c.chain.burn_in, "sampler");
  c.chain.kept_sweeps = get<int>(smp, "kept_sweeps", c.chain.kept_sweeps, "sampler");
  c.chain.thinning = get<int>(smp, "thinning", c.chain.thinning, "sampler");
  c.chain.initial_step = get<double>(smp, "initial_step", c.chain.initial_step, "sampler");
  c.chain.target_acceptance = get<double>(smp, "target_acceptance", c.chain.target_acceptance, "sampler");
  c.replicas = get<int>(smp, "replicas", c.replicas, "sampler");
  c.enumeration_cap = get<std::size_t>(smp, "enumeration_cap", c.enumeration_cap, "sampler");
  auto backend = get<std::string>(smp, "backend", "auto", "sampler");
  if (backend == "auto")
    c.backend = PosteriorBackend::Auto;
  else if (backend == "enumeration")
    c.backend = PosteriorBackend::Enumeration;
  else if (backend == "gibbs")
    c.backend = PosteriorBackend::Gibbs;
  else
    throw ConfigError("sampler.backend: expected auto, enumeration or gibbs");

  const YAML::Node bud = root["budget"];
  check_keys(bud, {"instances", "workers"}, "budget");
  c.instances = get<int>(bud, "instances", c.instances, "budget");
  c.workers = get<int>(bud, "workers", c.workers, "budget");

  if (root["seed"]) {
    try {
      c.seed = root["seed"].as<std::uint64_t>();
    } catch (const YAML::Exception&) {
      throw ConfigError("seed: expected an unsigned 64-bit integer");
    }
  }

  const YAML::Node out = root["output"];
  check_keys(out, {"dir", "formats"}, "output");
  c.output.dir = get<std::string>(out, "dir", c.output.dir, "output");
  if (out && out["formats"]) {
    auto formats = get<std::vector<std::string>>(out, "formats", {}, "output");
    c.output.csv = c.output.json = false;
    for (const auto& f : formats) {
      if (f == "csv")
        c.output.csv = true;
      else if (f == "json")
        c.output.json = true;
      else
        throw ConfigError("output.formats: unknown format '" + f + "'");
    }
  }

  if (root["identities"]) {
    const YAML::Node id = root["identities"];
    check_keys(id, {"exact", "mc"}, "identities");
    if (id["exact"]) {
      for (std::size_t i = 0; i < id["exact"].size(); ++i) {
        const YAML::Node e = id["exact"][i];
        std::string w = "identities.exact[" + std::to_string(i) + "]";
        check_keys(e, {"n", "K", "alpha", "flip", "temperature"}, w);
        CommitteeToy t;
        t.n = get<int>(e, "n", t.n, w);
        t.K = get<int>(e, "K", t.K, w);
        t.alpha = get<double>(e, "alpha", t.alpha, w);
        t.flip = get<double>(e, "flip", t.flip, w);
        double temp = get<double>(e, "temperature", 1.0, w);
        if (!(temp > 0.0)) throw ConfigError(w + ".temperature must be positive");
        t.beta = 1.0 / temp;
        c.identities.exact.push_back(t);
      }
    }
    if (id["mc"]) {
      for (std::size_t i = 0; i < id["mc"].size(); ++i) {
        const YAML::Node e = id["mc"][i];
        std::string w = "identities.mc[" + std::to_string(i) + "]";
        check_keys(e, {"name", "model", "prior", "n", "snr_scale", "draws", "temperature", "control", "resolution"}, w);
        McIdentityEntry m;
        m.name = get<std::string>(e, "name", "mc" + std::to_string(i), w);
        m.model = parse_model(e["model"], e["prior"]);
        m.n = get<int>(e, "n", m.n, w);
        m.snr_scale = get<double>(e, "snr_scale", m.snr_scale, w);
        m.draws = get<int>(e, "draws", m.draws, w);
        m.temperature = get<double>(e, "temperature", m.temperature, w);
        m.control = get<bool>(e, "control", m.control, w);
        m.resolution = get<double>(e, "resolution", m.resolution, w);
        if (!(m.temperature > 0.0)) throw ConfigError(w + ".temperature must be positive");
        if (m.snr_scale < 0.0) throw ConfigError(w + ".snr_scale must be >= 0");
        c.identities.mc.push_back(m);
      }
    }
  } else {
    c.identities = default_identity_suite();
  }

  const YAML::Node fe = root["free_energy"];
  check_keys(fe, {"method", "replicates", "base", "quadrature_points", "ti_nodes", "ti_burn_in", "ti_kept", "cap"},
             "free_energy");
  c.free_energy.method = get<std::string>(fe, "method", c.free_energy.method, "free_energy");
  if (c.free_energy.method != "exact" && c.free_energy.method != "quadrature" && c.free_energy.method != "thermodynamic")
    throw ConfigError("free_energy.method: expected exact, quadrature or thermodynamic");
  c.free_energy.replicates = get<int>(fe, "replicates", c.free_energy.replicates, "free_energy");
  c.free_energy.base = get<bool>(fe, "base", c.free_energy.base, "free_energy");
  auto& fo = c.free_energy.options;
  fo.quadrature_points = get<int>(fe, "quadrature_points", fo.quadrature_points, "free_energy");
  fo.ti_nodes = get<int>(fe, "ti_nodes", fo.ti_nodes, "free_energy");
  fo.ti_chain.burn_in = get<int>(fe, "ti_burn_in", fo.ti_chain.burn_in, "free_energy");
  fo.ti_chain.kept_sweeps = get<int>(fe, "ti_kept", fo.ti_chain.kept_sweeps, "free_energy");
  fo.cap = get<std::size_t>(fe, "cap", fo.cap, "free_energy");

  const YAML::Node mm = root["mmse"];
  check_keys(mm, {"side_channel", "tensor"}, "mmse");
  c.mmse.side_channel = get<bool>(mm, "side_channel", c.mmse.side_channel, "mmse");
  c.mmse.tensor = get<bool>(mm, "tensor", c.mmse.tensor, "mmse");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void validate(const ExperimentConfig& c) {
  if (!c.seed) throw ConfigError("no master seed: set 'seed' in the config or pass --seed");
  if (c.n_grid.empty()) throw ConfigError("schedule.n_grid must not be empty");
  for (std::size_t i = 0; i < c.n_grid.size(); ++i) {
    if (c.n_grid[i] < 1) throw ConfigError("schedule.n_grid entries must be >= 1");
    if (i > 0 && c.n_grid[i] <= c.n_grid[i - 1]) throw ConfigError("schedule.n_grid must be strictly increasing");
  }
  if (!c.s_n.values.empty()) {
    if (c.s_n.values.size() != c.n_grid.size()) throw ConfigError("schedule.s_n.values needs one value per grid point");
    for (double v : c.s_n.values)
      if (!(v > 0.0)) throw ConfigError("schedule.s_n.values must be positive");
  } else if (!(c.s_n.coefficient > 0.0)) {
    throw ConfigError("schedule.s_n.coefficient must be positive");
  }
  auto at_least_one = [](long v, const char* what) {
    if (v < 1) throw ConfigError(std::string(what) + " must be >= 1");
  };
  at_least_one(c.lambda_draws, "schedule.lambda_draws");
  at_least_one(c.chain.kept_sweeps, "sampler.kept_sweeps");
  at_least_one(c.chain.thinning, "sampler.thinning");
  at_least_one(c.replicas, "sampler.replicas");
  at_least_one(c.instances, "budget.instances");
  at_least_one(c.workers, "budget.workers");
  at_least_one(c.free_energy.replicates, "free_energy.replicates");
  if (c.chain.burn_in < 0) throw ConfigError("sampler.burn_in must be >= 0");
  for (const auto& m : c.identities.mc) at_least_one(m.draws, "identities.mc draws");
}

std::string to_yaml(const ExperimentConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  emit_model(out, c.model);
  out << YAML::Key << "schedule" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "n_grid" << YAML::Value << YAML::Flow << c.n_grid;
  out << YAML::Key << "lambda_draws" << YAML::Value << c.lambda_draws;
  out << YAML::Key << "s_n" << YAML::Value << YAML::BeginMap;
  if (c.s_n.values.empty()) {
    out << YAML::Key << "coefficient" << YAML::Value << c.s_n.coefficient << YAML::Key << "exponent" << YAML::Value
        << c.s_n.exponent;
  } else {
    out << YAML::Key << "values" << YAML::Value << YAML::Flow << c.s_n.values;
  }
  out << YAML::EndMap << YAML::EndMap;

  const char* backend = c.backend == PosteriorBackend::Auto ? "auto" : c.backend == PosteriorBackend::Gibbs ? "gibbs" : "enumeration";
  out << YAML::Key << "sampler" << YAML::Value << YAML::BeginMap << YAML::Key << "burn_in" << YAML::Value
      << c.chain.burn_in << YAML::Key << "kept_sweeps" << YAML::Value << c.chain.kept_sweeps << YAML::Key << "thinning"
      << YAML::Value << c.chain.thinning << YAML::Key << "replicas" << YAML::Value << c.replicas << YAML::Key
      << "initial_step" << YAML::Value << c.chain.initial_step << YAML::Key << "target_acceptance" << YAML::Value
      << c.chain.target_acceptance << YAML::Key << "backend" << YAML::Value << backend << YAML::Key << "enumeration_cap"
      << YAML::Value << c.enumeration_cap << YAML::EndMap;

  out << YAML::Key << "budget" << YAML::Value << YAML::BeginMap << YAML::Key << "instances" << YAML::Value << c.instances
      << YAML::Key << "workers" << YAML::Value << c.workers << YAML::EndMap;
  if (c.seed) out << YAML::Key << "seed" << YAML::Value << *c.seed;

  out << YAML::Key << "output" << YAML::Value << YAML::BeginMap << YAML::Key << "dir" << YAML::Value << c.output.dir;
  std::vector<std::string> formats;
  if (c.output.csv) formats.push_back("csv");
  if (c.output.json) formats.push_back("json");
  out << YAML::Key << "formats" << YAML::Value << YAML::Flow << formats << YAML::EndMap;

  out << YAML::Key << "identities" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "exact" << YAML::Value << YAML::BeginSeq;
  for (const auto& t : c.identities.exact)
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "n" << YAML::Value << t.n << YAML::Key << "K" << YAML::Value << t.K
        << YAML::Key << "alpha" << YAML::Value << t.alpha << YAML::Key << "flip" << YAML::Value << t.flip << YAML::Key
        << "temperature" << YAML::Value << 1.0 / t.beta << YAML::EndMap;
  out << YAML::EndSeq;
  out << YAML::Key << "mc" << YAML::Value << YAML::BeginSeq;
  for (const auto& m : c.identities.mc) {
    out << YAML::BeginMap << YAML::Key << "name" << YAML::Value << m.name;
    emit_model(out, m.model);
    out << YAML::Key << "n" << YAML::Value << m.n << YAML::Key << "snr_scale" << YAML::Value << m.snr_scale << YAML::Key
        << "draws" << YAML::Value << m.draws << YAML::Key << "temperature" << YAML::Value << m.temperature << YAML::Key
        << "control" << YAML::Value << m.control << YAML::Key << "resolution" << YAML::Value << m.resolution
        << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;

  const auto& fo = c.free_energy.options;
  out << YAML::Key << "free_energy" << YAML::Value << YAML::BeginMap << YAML::Key << "method" << YAML::Value
      << c.free_energy.method << YAML::Key << "replicates" << YAML::Value << c.free_energy.replicates << YAML::Key
      << "base" << YAML::Value << c.free_energy.base << YAML::Key << "quadrature_points" << YAML::Value
      << fo.quadrature_points << YAML::Key << "ti_nodes" << YAML::Value << fo.ti_nodes << YAML::Key << "ti_burn_in"
      << YAML::Value << fo.ti_chain.burn_in << YAML::Key << "ti_kept" << YAML::Value << fo.ti_chain.kept_sweeps
      << YAML::Key << "cap" << YAML::Value << fo.cap << YAML::EndMap;

  out << YAML::Key << "mmse" << YAML::Value << YAML::BeginMap << YAML::Key << "side_channel" << YAML::Value
      << c.mmse.side_channel << YAML::Key << "tensor" << YAML::Value << c.mmse.tensor << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace mmselab
