#include "ruleflow/dsb.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <thread>
#include <vector>

#include "support/test_util.hpp"

using namespace ruleflow;
using ruleflow::testing::wait_until;

namespace {
const Index kTem{"1", "Portable", "temperature"};
}

TEST(DsbRegister, CreatesWithReferenceOne) {
  Dsb dsb;
  dsb.register_index(kTem);
  EXPECT_EQ(dsb.reference_count(kTem), 1u);
  auto lookup = dsb.get(kTem);
  EXPECT_EQ(lookup.state, LookupState::kNoDataYet);
}

TEST(DsbRegister, CountsReferences) {
  Dsb dsb;
  dsb.register_index(kTem);
  dsb.register_index(kTem);
  EXPECT_EQ(dsb.reference_count(kTem), 2u);
  dsb.unregister_index(kTem);
  EXPECT_EQ(dsb.reference_count(kTem), 1u);
  dsb.unregister_index(kTem);
  EXPECT_EQ(dsb.get(kTem).state, LookupState::kAbsent);
}

TEST(DsbRegister, UnregisterAbsentThrows) {
  Dsb dsb;
  try {
    dsb.unregister_index(kTem);
    FAIL() << "expected UnknownDatasource";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownDatasource);
  }
}

TEST(DsbUpdate, AppliedAdvancesSession) {
  Dsb dsb;
  dsb.register_index(kTem);
  auto outcome = dsb.update(kTem, 23.0);
  EXPECT_TRUE(outcome.applied);
  EXPECT_EQ(outcome.session, 1u);
  auto lookup = dsb.get(kTem);
  ASSERT_EQ(lookup.state, LookupState::kValue);
  EXPECT_DOUBLE_EQ(lookup.sample.value, 23.0);
  EXPECT_EQ(lookup.sample.session, 1u);
}

TEST(DsbUpdate, NotRegisteredIsOutcomeNotError) {
  Dsb dsb;
  EXPECT_FALSE(dsb.update(kTem, 1.0).applied);
}

TEST(DsbUpdate, LastWriteWins) {
  Dsb dsb;
  dsb.register_index(kTem);
  dsb.update(kTem, 22.0);
  auto second = dsb.update(kTem, 23.4);
  EXPECT_EQ(second.session, 2u);
  EXPECT_DOUBLE_EQ(dsb.get(kTem).sample.value, 23.4);
}

TEST(DsbFilter, RegisteredKeyIsRelevant) {
  Dsb dsb;
  dsb.register_index(kTem);
  EXPECT_TRUE(dsb.maybe_relevant(filter_key(kTem)));
  EXPECT_FALSE(dsb.maybe_relevant(filter_key(Index{"1", "Portable", "humidity"})));
}

TEST(DsbFilter, StaleKeysClearedByRebuild) {
  Dsb dsb;
  // Register then fully remove more keys than stay live; the filter
  // rebuild threshold must kick in and clear them.
  for (int i = 0; i < 50; ++i) {
    dsb.register_index(Index{"d", "T", "gone-" + std::to_string(i)});
  }
  dsb.register_index(Index{"d", "T", "kept"});
  for (int i = 0; i < 50; ++i) {
    dsb.unregister_index(Index{"d", "T", "gone-" + std::to_string(i)});
  }
  EXPECT_TRUE(dsb.maybe_relevant(filter_key(Index{"d", "T", "kept"})));
  std::size_t stale = 0;
  for (int i = 0; i < 50; ++i) {
    if (dsb.maybe_relevant(filter_key(Index{"d", "T", "gone-" + std::to_string(i)}))) {
      ++stale;
    }
  }
  EXPECT_LT(stale, 50u);
}

TEST(DsbGet, ThreeStates) {
  Dsb dsb;
  EXPECT_EQ(dsb.get(kTem).state, LookupState::kAbsent);
  dsb.register_index(kTem);
  EXPECT_EQ(dsb.get(kTem).state, LookupState::kNoDataYet);
  dsb.update(kTem, 23.0);
  EXPECT_EQ(dsb.get(kTem).state, LookupState::kValue);
  dsb.unregister_index(kTem);
  EXPECT_EQ(dsb.get(kTem).state, LookupState::kAbsent);
}

TEST(DsbSubscribe, FanOutPerSubscriber) {
  Dsb dsb;
  dsb.register_index(kTem);
  auto q1 = std::make_shared<PushQueue>(16);
  auto q2 = std::make_shared<PushQueue>(16);
  dsb.subscribe(kTem, 1, q1);
  dsb.subscribe(kTem, 2, q2);
  dsb.update(kTem, 5.0);
  EXPECT_EQ(q1->size(), 1u);
  EXPECT_EQ(q2->size(), 1u);

  dsb.unsubscribe(kTem, 2);
  dsb.update(kTem, 6.0);
  EXPECT_EQ(q1->size(), 2u);
  EXPECT_EQ(q2->size(), 1u);

  auto message = q1->pop();
  ASSERT_TRUE(message);
  EXPECT_DOUBLE_EQ(message->value, 5.0);
  EXPECT_EQ(message->session, 1u);
}

TEST(DsbSubscribe, UnknownDatasourceThrows) {
  Dsb dsb;
  auto queue = std::make_shared<PushQueue>(4);
  EXPECT_THROW(dsb.subscribe(kTem, 1, queue), Error);
  EXPECT_THROW(dsb.unsubscribe(kTem, 1), Error);
}

// --- concurrency properties ---

TEST(DsbConcurrency, RefcountConservation) {
  Dsb dsb;
  constexpr int kThreads = 8;
  constexpr int kPerThread = 500;
  std::vector<std::thread> threads;
  for (int t = 0; t < kThreads; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < kPerThread; ++i) {
        dsb.register_index(kTem);
        dsb.unregister_index(kTem);
      }
    });
  }
  for (auto& thread : threads) thread.join();
  EXPECT_EQ(dsb.get(kTem).state, LookupState::kAbsent);
  EXPECT_EQ(dsb.entry_count(), 0u);
}

TEST(DsbConcurrency, SessionsStrictlyIncreaseGapFree) {
  Dsb dsb;
  dsb.register_index(kTem);
  constexpr int kThreads = 8;
  constexpr int kPerThread = 1000;
  std::atomic<std::uint64_t> applied{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < kThreads; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < kPerThread; ++i) {
        auto outcome = dsb.update(kTem, static_cast<double>(i));
        ASSERT_TRUE(outcome.applied);
        ASSERT_GE(outcome.session, 1u);
        applied.fetch_add(1);
      }
    });
  }
  for (auto& thread : threads) thread.join();
  // Gap-free: the final session equals the number of applied updates.
  EXPECT_EQ(dsb.get(kTem).sample.session, applied.load());
  EXPECT_EQ(applied.load(), static_cast<std::uint64_t>(kThreads) * kPerThread);
}

TEST(DsbConcurrency, PushCompletenessSingleSubscriber) {
  Dsb dsb;
  dsb.register_index(kTem);
  auto queue = std::make_shared<PushQueue>(4096);
  dsb.subscribe(kTem, 1, queue);
  constexpr int kUpdates = 2000;
  for (int i = 1; i <= kUpdates; ++i) dsb.update(kTem, static_cast<double>(i));
  ASSERT_EQ(queue->size(), static_cast<std::size_t>(kUpdates));
  std::uint64_t last_session = 0;
  while (auto message = queue->pop_for(std::chrono::milliseconds(0))) {
    EXPECT_EQ(message->session, last_session + 1);
    last_session = message->session;
  }
  EXPECT_EQ(last_session, static_cast<std::uint64_t>(kUpdates));
}

TEST(DsbConcurrency, BoundedQueueBlocksUpdater) {
  Dsb dsb;
  dsb.register_index(kTem);
  auto queue = std::make_shared<PushQueue>(2);
  dsb.subscribe(kTem, 1, queue);
  dsb.update(kTem, 1.0);
  dsb.update(kTem, 2.0);

  std::atomic<bool> third_done{false};
  std::thread updater([&] {
    dsb.update(kTem, 3.0);  // blocks until the consumer drains one slot
    third_done.store(true);
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  EXPECT_FALSE(third_done.load());
  queue->pop();
  EXPECT_TRUE(wait_until([&] { return third_done.load(); }, std::chrono::seconds(2)));
  updater.join();
}
