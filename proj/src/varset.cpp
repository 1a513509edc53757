#include "cqap/varset.hpp"

namespace cqap {

bool varset_less(VarSet a, VarSet b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a.members() < b.members();
}

}  // namespace cqap
