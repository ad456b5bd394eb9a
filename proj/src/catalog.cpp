#include "conformal/catalog.hpp"

#include <stdexcept>

namespace conformal {

namespace {

std::size_t us(int i) { return static_cast<std::size_t>(i); }

Truth yes(std::string src) { return {true, std::move(src)}; }
Truth no(std::string src) { return {false, std::move(src)}; }

std::vector<int> default_signs(std::vector<int> signs, int k) {
  if (signs.empty()) signs.assign(us(k), 1);
  if (static_cast<int>(signs.size()) != k) throw std::invalid_argument("need " + std::to_string(k) + " transverse signs");
  for (int s : signs)
    if (s != 1 && s != -1) throw std::invalid_argument("transverse signs must be +1 or -1");
  return signs;
}

std::vector<std::string> null_coords(int n) {
  std::vector<std::string> c{"u", "r"};
  for (int i = 0; i < n - 2; ++i) c.push_back("x" + std::to_string(i + 1));
  return c;
}

std::string signs_str(const std::vector<int>& s) {
  std::string out;
  for (int v : s) out += v > 0 ? '+' : '-';
  return out;
}

}  // namespace

std::vector<Bindings> CatalogEntry::sample(int count, std::uint64_t seed) const {
  return sample_points(*metric, box, count, seed);
}

Expr rt_psi(int n, int kappa, const Expr& h) {
  Expr r = Expr::symbol("r");
  Expr hp = diff(h, r);
  Expr hpp = diff(hp, r);
  Expr bracket = (Expr(kappa) + Expr(2) * h) * pow(r, Expr(-2)) - Expr(2) * hp * pow(r, Expr(-1)) + hpp;
  return Expr(Rational(1, (n - 1) * (n - 2))) * bracket;
}

Expr rt_scalar_curvature(int n, int kappa, const Expr& h) {
  Expr r = Expr::symbol("r");
  Expr hp = diff(h, r);
  Expr hpp = diff(hp, r);
  Expr inner = Expr(n - 3) * (Expr(kappa) + Expr(2) * h) * pow(r, Expr(-2)) + Expr(4) * hp * pow(r, Expr(-1));
  return Expr(n - 2) * inner + Expr(2) * hpp;
}

Expr rt_cspace_potential(int n, const Expr& psi) {
  Expr r = Expr::symbol("r");
  // log|Psi| via Psi^2 so that either sign of Psi is allowed
  return Expr(Rational(1 - n, n - 3)) * log(r) + Expr(Rational(1, 2 * (3 - n))) * log(psi * psi);
}

CatalogEntry robinson_trautman(int n, int kappa, const Expr& h, std::vector<int> signs, std::string name) {
  if (n < 4) throw std::invalid_argument("robinson_trautman needs n >= 4");
  if (kappa < -1 || kappa > 1) throw std::invalid_argument("kappa must be -1, 0 or 1");
  signs = default_signs(std::move(signs), n - 2);
  auto coords = null_coords(n);
  Expr r = Expr::symbol("r");
  std::vector<Expr> x;
  Expr x2;
  for (int i = 0; i < n - 2; ++i) {
    x.push_back(Expr::symbol(coords[us(2 + i)]));
    x2 = x2 + Expr(signs[us(i)]) * x.back() * x.back();
  }
  Expr conf = Expr(1) + Expr(Rational(kappa, 4)) * x2;
  std::vector<Expr> singular{r};
  if (kappa != 0) singular.push_back(conf);
  auto chart = std::make_shared<Chart>(coords, singular);

  ExprArray g = ExprArray::cube(n, 2);
  g(0, 0) = Expr(2) * h;
  g(0, 1) = g(1, 0) = Expr(1);
  for (int i = 0; i < n - 2; ++i) g(2 + i, 2 + i) = Expr(signs[us(i)]) * r * r * pow(conf, Expr(-2));

  ExprArray theta = ExprArray::cube(n, 2);
  theta(0, 0) = Expr(1);
  theta(1, 0) = h;
  theta(1, 1) = Expr(1);
  for (int i = 0; i < n - 2; ++i) theta(2 + i, 2 + i) = r * pow(conf, Expr(-1));

  CatalogEntry e;
  e.n = n;
  e.name = name.empty() ? "rt" + std::to_string(n) : std::move(name);
  e.description = "Robinson-Trautman, h = " + h.str();
  e.params = {{"n", std::to_string(n)}, {"kappa", std::to_string(kappa)}, {"signs", signs_str(signs)}, {"h", h.str()}};
  e.metric = std::make_shared<MetricField>(chart, std::move(g));
  e.box.ranges = {{0.0, 1.0}, {1.5, 3.0}};
  for (int i = 0; i < n - 2; ++i) e.box.ranges.push_back({-0.5, 0.5});
  e.psi = rt_psi(n, kappa, h);
  e.coframe = std::move(theta);
  e.cspace_potential = rt_cspace_potential(n, *e.psi);
  e.profile = h;
  e.truth.cspace = yes("closed form: K is the gradient of the potential wherever Psi != 0");
  return e;
}

CatalogEntry schwarzschild_de_sitter(int n, int kappa, Rational m, Rational lambda, std::string name) {
  Expr r = Expr::symbol("r");
  Expr h = Expr(Rational(-kappa, 2)) + Expr(m) * pow(r, Expr(3 - n)) +
           Expr(*Rational::mul(lambda, Rational(1, 2 * (n - 1)))) * r * r;
  CatalogEntry e = robinson_trautman(n, kappa, h, {}, name.empty() ? "sds" + std::to_string(n) : std::move(name));
  e.description = "Schwarzschild-de Sitter, m = " + m.str() + ", Lambda = " + lambda.str();
  e.params.push_back({"m", m.str()});
  e.params.push_back({"Lambda", lambda.str()});
  e.einstein_scale = Expr(1);
  e.truth.einstein = yes("closed form: the Einstein profile of the Robinson-Trautman family");
  e.truth.conformally_einstein = yes("closed form: already Einstein");
  e.truth.conformally_flat = m.is_zero() ? yes("trivial: m = 0") : no("closed form: Psi = m / r^(n-1) != 0");
  if (!m.is_zero()) {
    e.truth.weakly_generic = yes("closed form: Psi != 0");
    e.truth.generic = yes("closed form: Psi != 0");
  }
  return e;
}

CatalogEntry pp_wave(int n, const Expr& h, std::vector<int> signs, std::string name) {
  if (n < 4) throw std::invalid_argument("pp_wave needs n >= 4");
  signs = default_signs(std::move(signs), n - 2);
  auto coords = null_coords(n);
  auto chart = std::make_shared<Chart>(coords);
  ExprArray g = ExprArray::cube(n, 2);
  g(0, 0) = Expr(2) * h;
  g(0, 1) = g(1, 0) = Expr(1);
  for (int i = 0; i < n - 2; ++i) g(2 + i, 2 + i) = Expr(signs[us(i)]);

  // Einstein iff g^ij h_,ij = 0
  Expr lap;
  for (int i = 0; i < n - 2; ++i) {
    Expr xi = Expr::symbol(coords[us(2 + i)]);
    lap = lap + Expr(signs[us(i)]) * diff(diff(h, xi), xi);
  }
  CatalogEntry e;
  e.n = n;
  e.name = name.empty() ? "ppwave" + std::to_string(n) : std::move(name);
  e.description = "pp-wave, h = " + h.str();
  e.params = {{"n", std::to_string(n)}, {"signs", signs_str(signs)}, {"h", h.str()}};
  e.metric = std::make_shared<MetricField>(chart, std::move(g));
  e.box.ranges = {{0.2, 1.0}, {0.5, 1.5}};
  for (int i = 0; i < n - 2; ++i) e.box.ranges.push_back({0.2, 0.8});
  e.profile = h;
  e.truth.weakly_generic = no("closed form: d/dr lies in the kernel of C_abcd V^d");
  if (lap.is_zero()) {
    e.truth.einstein = yes("closed form: h harmonic in x");
    e.truth.conformally_einstein = yes("closed form: already Einstein");
    e.einstein_scale = Expr(1);
  } else {
    e.truth.einstein = no("derived: R_++ = -g^ij h_,ij != 0");
  }
  return e;
}

CatalogEntry hyperkahler_example() {
  auto chart_coords = std::vector<std::string>{"x1", "y1", "x2", "y2"};
  Expr x1 = Expr::symbol("x1"), y1 = Expr::symbol("y1"), x2 = Expr::symbol("x2"), y2 = Expr::symbol("y2");
  Expr rho = Expr(2) * x1 - Expr(2) * (x2 * x2 + y2 * y2);
  auto chart = std::make_shared<Chart>(chart_coords, std::vector<Expr>{rho});

  // dz1 - 2 conj(z2) dz2 = w1 + i w2 as real one-forms, components over (x1, y1, x2, y2)
  std::vector<Expr> w1{Expr(1), Expr(0), Expr(-2) * x2, Expr(-2) * y2};
  std::vector<Expr> w2{Expr(0), Expr(1), Expr(2) * y2, Expr(-2) * x2};
  Expr a = pow(rho, Expr(Rational(-1, 2)));
  Expr b = Expr(4) * pow(rho, Expr(Rational(1, 2)));
  ExprArray g = ExprArray::cube(4, 2);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      Expr v = a * (w1[us(i)] * w1[us(j)] + w2[us(i)] * w2[us(j)]);
      if (i == j && i >= 2) v = v + b;
      g(i, j) = v;
    }

  CatalogEntry e;
  e.n = 4;
  e.name = "hyperkahler";
  e.description = "Ricci-flat hyperKaehler metric, rho = 2 x1 - 2 (x2^2 + y2^2)";
  e.params = {{"rho", rho.str()}};
  e.metric = std::make_shared<MetricField>(chart, std::move(g));
  e.box.ranges = {{1.0, 2.0}, {-0.5, 0.5}, {-0.5, 0.5}, {-0.5, 0.5}};
  e.einstein_scale = Expr(1);
  e.truth.einstein = yes("closed form: Ricci flat");
  e.truth.conformally_einstein = yes("closed form: Ricci flat");
  e.truth.conformally_flat = no("closed form: |C|^2 = 24 / rho^3");
  e.truth.weakly_generic = yes("closed form: non-flat hyperKaehler");
  e.truth.lambda2_generic = no("closed form: the three Kaehler forms lie in the kernel");
  e.truth.generic = no("closed form: not Lambda^2-generic");
  return e;
}

CatalogEntry constant_curvature(int n, int kappa) {
  if (n < 3) throw std::invalid_argument("constant_curvature needs n >= 3");
  std::vector<std::string> coords;
  for (int i = 0; i < n; ++i) coords.push_back("x" + std::to_string(i + 1));
  Expr x2;
  for (const auto& c : coords) x2 = x2 + Expr::symbol(c) * Expr::symbol(c);
  Expr conf = Expr(1) + Expr(Rational(kappa, 4)) * x2;
  std::vector<Expr> singular;
  if (kappa != 0) singular.push_back(conf);
  auto chart = std::make_shared<Chart>(coords, singular);
  ExprArray g = ExprArray::cube(n, 2);
  for (int i = 0; i < n; ++i) g(i, i) = pow(conf, Expr(-2));

  CatalogEntry e;
  e.n = n;
  e.name = (kappa > 0 ? "sphere" : kappa < 0 ? "hyperbolic" : "flat") + std::to_string(n);
  e.description = "constant curvature " + std::to_string(kappa) + ", stereographic chart";
  e.params = {{"n", std::to_string(n)}, {"kappa", std::to_string(kappa)}};
  e.metric = std::make_shared<MetricField>(chart, std::move(g));
  e.box = SampleBox::uniform(n, -0.5, 0.5);
  e.einstein_scale = Expr(1);
  e.truth.einstein = yes("trivial: constant curvature");
  e.truth.conformally_einstein = yes("trivial: constant curvature");
  e.truth.conformally_flat = yes("trivial: conformal to flat in this chart");
  e.truth.weakly_generic = no("trivial: Weyl = 0");
  e.truth.lambda2_generic = no("trivial: Weyl = 0");
  e.truth.generic = no("trivial: Weyl = 0");
  e.truth.cspace = yes("trivial: Cotton = 0");
  return e;
}

CatalogEntry flat(int p, int q) {
  const int n = p + q;
  if (n < 3) throw std::invalid_argument("flat needs n >= 3");
  std::vector<std::string> coords;
  for (int i = 0; i < n; ++i) coords.push_back("x" + std::to_string(i + 1));
  auto chart = std::make_shared<Chart>(coords);
  ExprArray g = ExprArray::cube(n, 2);
  for (int i = 0; i < n; ++i) g(i, i) = Expr(i < p ? 1 : -1);
  CatalogEntry e;
  e.n = n;
  e.name = "flat" + std::to_string(n) + (q > 0 ? "_" + std::to_string(p) + std::to_string(q) : "");
  e.description = "flat metric of signature (" + std::to_string(p) + ", " + std::to_string(q) + ")";
  e.params = {{"p", std::to_string(p)}, {"q", std::to_string(q)}};
  e.metric = std::make_shared<MetricField>(chart, std::move(g));
  e.box = SampleBox::uniform(n, -0.5, 0.5);
  e.einstein_scale = Expr(1);
  e.truth.einstein = yes("trivial: flat");
  e.truth.conformally_einstein = yes("trivial: flat");
  e.truth.conformally_flat = yes("trivial: flat");
  e.truth.weakly_generic = no("trivial: Weyl = 0");
  e.truth.lambda2_generic = no("trivial: Weyl = 0");
  e.truth.generic = no("trivial: Weyl = 0");
  e.truth.cspace = yes("trivial: Cotton = 0");
  return e;
}

namespace {

CatalogEntry rt_power(int n, int k) {
  Expr r = Expr::symbol("r");
  CatalogEntry e = robinson_trautman(n, 1, pow(r, Expr(k)), {}, "rt" + std::to_string(n) + "_r" + std::to_string(k));
  e.truth.einstein = no("closed form: not of the Einstein profile");
  e.truth.conformally_einstein = no("closed form: fails the Bach condition");
  e.truth.conformally_flat = no("closed form: Psi != 0");
  e.truth.weakly_generic = yes("closed form: Psi != 0");
  e.truth.generic = yes("closed form: Psi != 0");
  return e;
}

}  // namespace

std::vector<std::string> catalog_names() {
  return {"flat4",     "sphere3",   "sphere4",     "schwarzschild", "sds4",       "sds5",
          "rt4_r4",    "rt5_r4",    "rt6_r4",      "ppwave4",       "ppwave4_cubic", "hyperkahler"};
}

CatalogEntry catalog_entry(std::string_view name) {
  Expr x1 = Expr::symbol("x1"), x2 = Expr::symbol("x2"), u = Expr::symbol("u");
  if (name == "flat4") return flat(4);
  if (name == "sphere3") return constant_curvature(3, 1);
  if (name == "sphere4") return constant_curvature(4, 1);
  if (name == "schwarzschild") {
    CatalogEntry e = schwarzschild_de_sitter(4, 1, 1, 0, "schwarzschild");
    e.description = "Schwarzschild, m = 1";
    return e;
  }
  if (name == "sds4") return schwarzschild_de_sitter(4, 1, 1, 2, "sds4");
  if (name == "sds5") return schwarzschild_de_sitter(5, 1, 1, 2, "sds5");
  if (name == "rt4_r4") return rt_power(4, 4);
  if (name == "rt5_r4") return rt_power(5, 4);
  if (name == "rt6_r4") return rt_power(6, 4);
  if (name == "ppwave4") return pp_wave(4, x1 * x1 - x2 * x2, {}, "ppwave4");
  if (name == "ppwave4_cubic") return pp_wave(4, x1 * x1 * x1 * u, {}, "ppwave4_cubic");
  if (name == "hyperkahler") return hyperkahler_example();
  throw std::invalid_argument("unknown catalog entry '" + std::string(name) + "'");
}

}  // namespace conformal
