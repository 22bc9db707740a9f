#include <doctest.h>

#include <cstdlib>
#include <stdexcept>
#include <thread>
#include <vector>

#include "visern/parallel.hpp"

using namespace visern;

TEST_SUITE("parallel") {
  TEST_CASE("worker count follows VISERN_THREADS") {
    ::setenv("VISERN_THREADS", "3", 1);
    CHECK(worker_count() == 3);
    ::setenv("VISERN_THREADS", "0", 1);
    CHECK(worker_count() == std::max(1u, std::thread::hardware_concurrency()));
    ::setenv("VISERN_THREADS", "many", 1);
    CHECK(worker_count() >= 1);
    ::unsetenv("VISERN_THREADS");
    CHECK(worker_count() >= 1);
  }

  TEST_CASE("every index is visited exactly once") {
    for (const char* threads : {"1", "4"}) {
      ::setenv("VISERN_THREADS", threads, 1);
      std::vector<int> hits(1000, 0);
      parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
      for (int h : hits) CHECK(h == 1);
      parallel_for(0, [&](std::size_t) { FAIL("no work expected"); });
    }
    ::unsetenv("VISERN_THREADS");
  }

  TEST_CASE("exceptions propagate to the caller") {
    for (const char* threads : {"1", "4"}) {
      ::setenv("VISERN_THREADS", threads, 1);
      CHECK_THROWS_AS(parallel_for(50,
                                   [](std::size_t i) {
                                     if (i == 17) throw std::runtime_error("boom");
                                   }),
                      std::runtime_error);
    }
    ::unsetenv("VISERN_THREADS");
  }
}
