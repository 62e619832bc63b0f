#include "proxqn/bench.hpp"

#include "proxqn/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#ifndef PROXQN_VERSION
#define PROXQN_VERSION "0.0.0"
#endif

namespace proxqn {

const char* version() { return PROXQN_VERSION; }

namespace {

// Sub-streams of a recipe seed, so adding a draw in one place does not shift
// the others.
constexpr std::uint64_t kBlockStream = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kPowerSeed = 0x243F6A8885A308D3ULL;

std::string format_double(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

Vector sparse_signal(Rng& rng, Index n, bool nonneg) {
  Vector x = Vector::Zero(n);
  const Index k = std::max<Index>(1, n / 20);
  for (Index j = 0; j < k; ++j) {
    const Index i = rng.index(n);
    const double v = rng.normal();
    x(i) = nonneg ? std::abs(v) : v;
  }
  return x;
}

}  // namespace

// ---------------------------------------------------------------- recipes

std::string to_string(Family family) {
  switch (family) {
    case Family::LassoGaussian: return "lasso_gaussian";
    case Family::LassoDiff3d: return "lasso_diff3d";
    case Family::GroupLasso: return "group_lasso";
    case Family::Nnls: return "nnls";
  }
  return "unknown";
}

const std::vector<std::string>& family_names() {
  static const std::vector<std::string> names = {"lasso_gaussian", "lasso_diff3d", "group_lasso", "nnls"};
  return names;
}

Family parse_family(const std::string& name) {
  if (name == "lasso_gaussian") return Family::LassoGaussian;
  if (name == "lasso_diff3d") return Family::LassoDiff3d;
  if (name == "group_lasso") return Family::GroupLasso;
  if (name == "nnls") return Family::Nnls;
  throw std::invalid_argument("unknown problem family '" + name + "'");
}

Index ProblemRecipe::rows() const { return family == Family::LassoDiff3d ? 3 * side * side * side : m; }
Index ProblemRecipe::cols() const { return family == Family::LassoDiff3d ? side * side * side : n; }

std::string ProblemRecipe::id() const {
  std::string s = to_string(family);
  if (family == Family::LassoDiff3d) {
    s += "-side" + std::to_string(side);
  } else {
    s += "-m" + std::to_string(m) + "-n" + std::to_string(n);
  }
  if (family != Family::Nnls) s += "-lam" + format_double(lambda, 6);
  if (family == Family::GroupLasso) s += "-cap" + std::to_string(block_cap);
  s += "-seed" + std::to_string(seed);
  return s;
}

std::uint64_t ProblemRecipe::hash() const {
  // Canonical text: every field that changes the instance, at full precision.
  std::ostringstream os;
  os << "proxqn-recipe-v1|" << to_string(family) << '|' << rows() << '|' << cols() << '|'
     << (family == Family::Nnls ? std::string("-") : format_double(lambda, 17)) << '|'
     << (family == Family::GroupLasso ? block_cap : 0) << '|' << seed;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : os.str()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string ProblemRecipe::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, hash());
  return buf;
}

void ProblemRecipe::validate() const {
  if (family == Family::LassoDiff3d) {
    if (side < 2) throw std::invalid_argument("recipe: grid side must be at least 2");
  } else if (m <= 0 || n <= 0) {
    throw std::invalid_argument("recipe: m and n must be positive");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("recipe: lambda must be >= 0");
  if (family == Family::GroupLasso && block_cap <= 0) {
    throw std::invalid_argument("recipe: block cap must be positive");
  }
}

ProblemRecipe ProblemRecipe::desk(Family family, std::uint64_t seed) {
  ProblemRecipe r;
  r.family = family;
  r.seed = seed;
  switch (family) {
    case Family::LassoGaussian: r.m = 150; r.n = 300; r.lambda = 0.1; break;
    case Family::LassoDiff3d: r.side = 7; r.lambda = 1.0; break;
    case Family::GroupLasso: r.m = 160; r.n = 250; r.lambda = 1.0; r.block_cap = 12; break;
    case Family::Nnls: r.m = 150; r.n = 300; r.lambda = 0.0; break;
  }
  return r;
}

ProblemRecipe ProblemRecipe::full(Family family, std::uint64_t seed) {
  ProblemRecipe r = desk(family, seed);
  switch (family) {
    case Family::LassoGaussian: r.m = 1500; r.n = 3000; break;
    case Family::LassoDiff3d: r.side = 15; break;
    case Family::GroupLasso: r.m = 1600; r.n = 2500; break;
    case Family::Nnls: r.m = 1500; r.n = 3000; break;
  }
  return r;
}

void to_json(nlohmann::json& j, const ProblemRecipe& r) {
  j = nlohmann::json{{"family", to_string(r.family)}, {"m", r.m}, {"n", r.n}, {"side", r.side},
                     {"lambda", r.lambda}, {"block_cap", r.block_cap}, {"seed", r.seed}};
}

void from_json(const nlohmann::json& j, ProblemRecipe& r) {
  r = ProblemRecipe::desk(parse_family(j.at("family").get<std::string>()));
  if (j.contains("m")) r.m = j.at("m").get<Index>();
  if (j.contains("n")) r.n = j.at("n").get<Index>();
  if (j.contains("side")) r.side = j.at("side").get<Index>();
  if (j.contains("lambda")) r.lambda = j.at("lambda").get<double>();
  if (j.contains("block_cap")) r.block_cap = j.at("block_cap").get<Index>();
  if (j.contains("seed")) r.seed = j.at("seed").get<std::uint64_t>();
}

// ---------------------------------------------------------------- data

Vector DataMatrix::apply(const Vector& x) const {
  require_same_size(cols(), x.size(), "data matrix apply");
  return sparse_flag_ ? Vector(sparse_ * x) : Vector(dense_ * x);
}

Vector DataMatrix::apply_transpose(const Vector& y) const {
  require_same_size(rows(), y.size(), "data matrix transpose apply");
  return sparse_flag_ ? Vector(sparse_.transpose() * y) : Vector(dense_.transpose() * y);
}

double spectral_norm_sq(const DataMatrix& a, int max_steps, double tol) {
  Rng rng(kPowerSeed);
  Vector v = rng.normal_vector(a.cols());
  v.normalize();
  double lambda = 0.0;
  for (int k = 0; k < max_steps; ++k) {
    const Vector w = a.apply_transpose(a.apply(v));
    const double next = w.norm();
    if (next == 0.0) return 0.0;
    v = w / next;
    const bool done = std::abs(next - lambda) <= tol * next;
    lambda = next;
    if (done) break;
  }
  return lambda;
}

ProblemSpec least_squares_problem(DataMatrix a, Vector b, ProxPtr h) {
  return least_squares_problem(std::make_shared<const DataMatrix>(std::move(a)), std::move(b), std::move(h));
}

ProblemSpec least_squares_problem(std::shared_ptr<const DataMatrix> data, Vector b, ProxPtr h) {
  require_same_size(data->rows(), b.size(), "least squares right-hand side");
  auto rhs = std::make_shared<const Vector>(std::move(b));
  ProblemSpec p;
  p.dim = data->cols();
  p.f = [data, rhs](const Vector& x) { return 0.5 * (data->apply(x) - *rhs).squaredNorm(); };
  p.grad = [data, rhs](const Vector& x) { return Vector(data->apply_transpose(data->apply(x) - *rhs)); };
  p.h = std::move(h);
  p.lipschitz = spectral_norm_sq(*data);
  return p;
}

SparseMatrix forward_difference_3d(Index side) {
  if (side < 1) throw std::invalid_argument("forward differences: side must be positive");
  const Index n = side * side * side;
  const Index strides[3] = {1, side, side * side};
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(6 * n));
  for (Index axis = 0; axis < 3; ++axis) {
    for (Index k = 0; k < side; ++k)
      for (Index j = 0; j < side; ++j)
        for (Index i = 0; i < side; ++i) {
          const Index idx = i + side * (j + side * k);
          const Index coord = axis == 0 ? i : (axis == 1 ? j : k);
          if (coord + 1 >= side) continue;  // zero boundary row
          const Index row = axis * n + idx;
          entries.emplace_back(row, idx, -1.0);
          entries.emplace_back(row, idx + strides[axis], 1.0);
        }
  }
  SparseMatrix a(3 * n, n);
  a.setFromTriplets(entries.begin(), entries.end());
  a.makeCompressed();
  return a;
}

std::vector<Index> random_block_sizes(Index n, Index cap, std::uint64_t seed) {
  if (n <= 0 || cap <= 0) throw std::invalid_argument("block sizes: n and cap must be positive");
  Rng rng(seed);
  std::vector<Index> sizes;
  Index total = 0;
  while (total < n) {
    const Index size = std::min<Index>(1 + rng.index(cap), n - total);
    sizes.push_back(size);
    total += size;
  }
  return sizes;
}

ProblemInstance generate(const ProblemRecipe& recipe) {
  recipe.validate();
  ProblemInstance inst;
  inst.recipe = recipe;
  Rng rng(recipe.seed);
  ProxPtr h;
  DataMatrix a;
  switch (recipe.family) {
    case Family::LassoGaussian: {
      a = DataMatrix(rng.normal_matrix(recipe.m, recipe.n));
      const Vector x0 = sparse_signal(rng, recipe.n, false);
      inst.b = a.apply(x0) + 0.01 * rng.normal_vector(recipe.m);
      h = std::make_shared<L1Prox>(recipe.lambda);
      break;
    }
    case Family::LassoDiff3d: {
      a = DataMatrix(forward_difference_3d(recipe.side));
      inst.b = rng.normal_vector(a.rows());
      h = std::make_shared<L1Prox>(recipe.lambda);
      break;
    }
    case Family::GroupLasso: {
      a = DataMatrix(rng.uniform_matrix(recipe.m, recipe.n));
      inst.b = rng.uniform_vector(recipe.m);
      inst.block_sizes = random_block_sizes(recipe.n, recipe.block_cap, recipe.seed ^ kBlockStream);
      h = std::make_shared<GroupL2Prox>(recipe.lambda, inst.block_sizes);
      break;
    }
    case Family::Nnls: {
      a = DataMatrix(rng.normal_matrix(recipe.m, recipe.n));
      const Vector x0 = sparse_signal(rng, recipe.n, true);
      inst.b = a.apply(x0) + 0.01 * rng.normal_vector(recipe.m);
      h = std::make_shared<NonNegProx>();
      break;
    }
  }
  inst.a = std::make_shared<const DataMatrix>(std::move(a));
  inst.spec = least_squares_problem(inst.a, inst.b, std::move(h));
  return inst;
}

// ---------------------------------------------------------------- references

ReferenceSolution reference_solution(const ProblemSpec& problem, const ReferenceOptions& options) {
  SolverOptions opts;
  opts.tol = options.tol;
  opts.max_iter = options.max_iter;
  opts.record_trace = false;
  const SolverResult run = run_fista_restart(problem, opts);
  ReferenceSolution ref;
  ref.x = run.x;
  ref.f_star = run.objective;
  ref.iterations = run.iterations;
  ref.approximate = run.termination != Termination::Converged;
  return ref;
}

std::filesystem::path default_cache_dir() {
  if (const char* env = std::getenv("PROXQN_CACHE_DIR"); env && *env) return env;
  return ".proxqn_cache";
}

namespace {

constexpr char kCacheMagic[8] = {'P', 'Q', 'N', 'R', 'E', 'F', '0', '1'};

bool read_cached(const std::filesystem::path& bin, const std::filesystem::path& meta, const ProblemInstance& inst,
                 const ReferenceOptions& options, ReferenceSolution& out) {
  std::ifstream mf(meta);
  if (!mf) return false;
  nlohmann::json j;
  try {
    mf >> j;
    if (j.at("hash").get<std::string>() != inst.recipe.hash_hex()) return false;
    if (j.at("tol").get<double>() > options.tol) return false;
    if (j.at("approximate").get<bool>() && j.at("max_iter").get<int>() < options.max_iter) return false;
    out.approximate = j.at("approximate").get<bool>();
    out.iterations = j.at("iterations").get<int>();
  } catch (const std::exception&) {
    return false;
  }
  std::ifstream bf(bin, std::ios::binary);
  if (!bf) return false;
  char magic[8];
  std::uint64_t n = 0;
  bf.read(magic, sizeof magic);
  bf.read(reinterpret_cast<char*>(&n), sizeof n);
  bf.read(reinterpret_cast<char*>(&out.f_star), sizeof out.f_star);
  if (!bf || std::memcmp(magic, kCacheMagic, sizeof magic) != 0) return false;
  if (n != static_cast<std::uint64_t>(inst.spec.dim)) return false;
  out.x.resize(static_cast<Index>(n));
  bf.read(reinterpret_cast<char*>(out.x.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!bf) return false;
  out.from_cache = true;
  return true;
}

// Write to a temporary name and rename, so concurrent readers never see a
// half-written file.
void write_atomically(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("reference cache: cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("reference cache: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

ReferenceSolution reference_solution(const ProblemInstance& inst, const std::filesystem::path& cache_dir,
                                     const ReferenceOptions& options) {
  const std::string key = inst.recipe.hash_hex();
  const auto bin = cache_dir / (key + ".bin");
  const auto meta = cache_dir / (key + ".json");
  ReferenceSolution ref;
  if (read_cached(bin, meta, inst, options, ref)) return ref;

  ref = reference_solution(inst.spec, options);
  std::filesystem::create_directories(cache_dir);
  std::string bytes(kCacheMagic, sizeof kCacheMagic);
  const auto n = static_cast<std::uint64_t>(ref.x.size());
  bytes.append(reinterpret_cast<const char*>(&n), sizeof n);
  bytes.append(reinterpret_cast<const char*>(&ref.f_star), sizeof ref.f_star);
  bytes.append(reinterpret_cast<const char*>(ref.x.data()), ref.x.size() * sizeof(double));
  write_atomically(bin, bytes);

  nlohmann::json j;
  j["recipe"] = inst.recipe;
  j["recipe_id"] = inst.recipe.id();
  j["hash"] = key;
  j["n"] = ref.x.size();
  j["f_star"] = ref.f_star;
  j["approximate"] = ref.approximate;
  j["iterations"] = ref.iterations;
  j["tol"] = options.tol;
  j["max_iter"] = options.max_iter;
  j["method"] = "fista-restart";
  j["version"] = version();
  write_atomically(meta, j.dump(2) + "\n");
  return ref;
}

void attach_reference(ProblemInstance& inst, const ReferenceSolution& ref) {
  inst.spec.x_star = ref.x;
  inst.spec.f_star = ref.f_star;
}

// ---------------------------------------------------------------- races

std::vector<RaceEntry> race(const std::vector<ProblemInstance>& problems, const RaceOptions& options,
                            const std::function<void(const RaceEntry&)>& sink) {
  for (const auto& id : options.solvers) {
    if (id != "fista-restart" && std::find(solver_ids().begin(), solver_ids().end(), id) == solver_ids().end()) {
      throw std::invalid_argument("race: unknown solver '" + id + "'");
    }
  }
  const std::size_t n_solvers = options.solvers.size();
  const std::size_t n_tasks = problems.size() * n_solvers;
  std::vector<RaceEntry> entries(n_tasks);
  if (n_tasks == 0) return entries;

  unsigned jobs = options.jobs ? options.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, n_tasks));
  std::atomic<std::size_t> next{0};
  std::mutex sink_mutex;

  auto worker = [&]() {
    for (std::size_t t = next++; t < n_tasks; t = next++) {
      const ProblemInstance& problem = problems[t / n_solvers];
      RaceEntry entry;
      entry.solver = options.solvers[t % n_solvers];
      entry.recipe = problem.recipe;
      try {
        entry.result = run_solver(entry.solver, problem.spec, options.budget);
        if (entry.result.termination == Termination::Failed || entry.result.termination == Termination::Diverged) {
          entry.failed = true;
          entry.error = entry.result.message;
        }
      } catch (const std::exception& e) {
        entry.failed = true;
        entry.error = e.what();
        entry.result.solver = entry.solver;
        entry.result.termination = Termination::Failed;
        entry.result.message = e.what();
      }
      entries[t] = std::move(entry);
      if (sink) {
        std::lock_guard<std::mutex> lock(sink_mutex);
        sink(entries[t]);
      }
    }
  };

  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return entries;
}

}  // namespace proxqn
