#include "evdiff/seqmap/time_map.hpp"

namespace evdiff {

std::atomic<long>& time_overflow_warnings() {
  static std::atomic<long> counter{0};
  return counter;
}

}  // namespace evdiff
