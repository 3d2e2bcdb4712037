// Template definitions for term.hpp.

namespace effv {

template <class F>
TermPtr rewrite(const TermPtr &t, F &&f) {
  if (!t) return t;
  bool changed = false;
  std::vector<TermPtr> kids;
  kids.reserve(t->kids.size());
  for (const auto &k : t->kids) {
    TermPtr nk = rewrite(k, f);
    changed |= nk != k;
    kids.push_back(std::move(nk));
  }
  std::vector<TermCase> cases;
  for (const auto &c : t->cases) {
    TermPtr nb = rewrite(c.body, f);
    changed |= nb != c.body;
    cases.push_back({c.pat, std::move(nb)});
  }
  std::vector<std::vector<TermPtr>> trig;
  for (const auto &group : t->triggers) {
    std::vector<TermPtr> g;
    for (const auto &x : group) {
      TermPtr nx = rewrite(x, f);
      changed |= nx != x;
      g.push_back(std::move(nx));
    }
    trig.push_back(std::move(g));
  }
  TermPtr cur = t;
  if (changed) {
    auto copy = std::make_shared<Term>(*t);
    copy->kids = std::move(kids);
    copy->cases = std::move(cases);
    copy->triggers = std::move(trig);
    cur = copy;
  }
  if (TermPtr r = f(cur)) return r;
  return cur;
}

}  // namespace effv
