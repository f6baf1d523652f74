#include "ruleflow/storage.hpp"

#include <sqlite3.h>

#include <map>
#include <mutex>

#include "ruleflow/error.hpp"

namespace ruleflow {

const char* to_string(RuleState state) {
  switch (state) {
    case RuleState::kInactive: return "inactive";
    case RuleState::kScheduled: return "scheduled";
    case RuleState::kActive: return "active";
  }
  return "inactive";
}

const char* to_string(TriggerMode mode) {
  switch (mode) {
    case TriggerMode::kPeriodic: return "periodic";
    case TriggerMode::kPeriodicDedup: return "periodic_dedup";
    case TriggerMode::kPush: return "push";
  }
  return "periodic";
}

std::optional<RuleState> parse_rule_state(std::string_view s) {
  if (s == "inactive") return RuleState::kInactive;
  if (s == "scheduled") return RuleState::kScheduled;
  if (s == "active") return RuleState::kActive;
  return std::nullopt;
}

std::optional<TriggerMode> parse_trigger_mode(std::string_view s) {
  if (s == "periodic") return TriggerMode::kPeriodic;
  if (s == "periodic_dedup") return TriggerMode::kPeriodicDedup;
  if (s == "push") return TriggerMode::kPush;
  return std::nullopt;
}

namespace {

class MemoryRuleStore final : public RuleStore {
 public:
  std::uint64_t insert(const RuleRecord& record) override {
    std::lock_guard lock(mutex_);
    RuleRecord copy = record;
    copy.rid = next_rid_++;
    records_[copy.rid] = copy;
    return copy.rid;
  }

  std::optional<RuleRecord> get(std::uint64_t rid) const override {
    std::lock_guard lock(mutex_);
    auto it = records_.find(rid);
    if (it == records_.end()) return std::nullopt;
    return it->second;
  }

  void update(const RuleRecord& record) override {
    std::lock_guard lock(mutex_);
    auto it = records_.find(record.rid);
    if (it == records_.end()) {
      throw Error(ErrorCode::kUnknownRule, "rule " + std::to_string(record.rid));
    }
    it->second = record;
  }

  void remove(std::uint64_t rid) override {
    std::lock_guard lock(mutex_);
    if (records_.erase(rid) == 0) {
      throw Error(ErrorCode::kUnknownRule, "rule " + std::to_string(rid));
    }
  }

  std::vector<RuleRecord> list() const override {
    std::lock_guard lock(mutex_);
    std::vector<RuleRecord> out;
    out.reserve(records_.size());
    for (const auto& [rid, record] : records_) out.push_back(record);
    return out;
  }

  std::size_t size() const override {
    std::lock_guard lock(mutex_);
    return records_.size();
  }

 private:
  mutable std::mutex mutex_;
  std::map<std::uint64_t, RuleRecord> records_;
  std::uint64_t next_rid_ = 1;
};

#define kColumns                                                            \
  "rid, name, datasource, condition, action, state, period_seconds,"       \
  " trigger_mode, created_at_ms, updated_at_ms, fire_at_ms"

class SqliteRuleStore final : public RuleStore {
 public:
  explicit SqliteRuleStore(const std::string& path) {
    int rc = sqlite3_open_v2(path.c_str(), &db_,
                             SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE |
                                 SQLITE_OPEN_FULLMUTEX,
                             nullptr);
    if (rc != SQLITE_OK) {
      std::string message = db_ ? sqlite3_errmsg(db_) : "open failed";
      if (db_) sqlite3_close(db_);
      throw Error(ErrorCode::kIo, "sqlite open '" + path + "': " + message);
    }
    exec("PRAGMA journal_mode=WAL");
    exec(
        "CREATE TABLE IF NOT EXISTS rules ("
        "  rid INTEGER PRIMARY KEY AUTOINCREMENT,"
        "  name TEXT NOT NULL,"
        "  datasource TEXT NOT NULL,"
        "  condition TEXT NOT NULL,"
        "  action TEXT NOT NULL,"
        "  state TEXT NOT NULL,"
        "  period_seconds INTEGER NOT NULL,"
        "  trigger_mode TEXT NOT NULL,"
        "  created_at_ms INTEGER NOT NULL,"
        "  updated_at_ms INTEGER NOT NULL,"
        "  fire_at_ms INTEGER"
        ")");
  }

  ~SqliteRuleStore() override {
    if (db_) sqlite3_close(db_);
  }

  std::uint64_t insert(const RuleRecord& record) override {
    std::lock_guard lock(mutex_);
    Statement stmt(db_,
                   "INSERT INTO rules (name, datasource, condition, action, state,"
                   " period_seconds, trigger_mode, created_at_ms, updated_at_ms,"
                   " fire_at_ms) VALUES (?,?,?,?,?,?,?,?,?,?)");
    bind_record(stmt.get(), record, 1);
    stmt.step_done();
    return static_cast<std::uint64_t>(sqlite3_last_insert_rowid(db_));
  }

  std::optional<RuleRecord> get(std::uint64_t rid) const override {
    std::lock_guard lock(mutex_);
    Statement stmt(db_, "SELECT " kColumns " FROM rules WHERE rid = ?");
    sqlite3_bind_int64(stmt.get(), 1, static_cast<sqlite3_int64>(rid));
    if (sqlite3_step(stmt.get()) != SQLITE_ROW) return std::nullopt;
    return read_record(stmt.get());
  }

  void update(const RuleRecord& record) override {
    std::lock_guard lock(mutex_);
    Statement stmt(db_,
                   "UPDATE rules SET name=?, datasource=?, condition=?, action=?,"
                   " state=?, period_seconds=?, trigger_mode=?, created_at_ms=?,"
                   " updated_at_ms=?, fire_at_ms=? WHERE rid=?");
    bind_record(stmt.get(), record, 1);
    sqlite3_bind_int64(stmt.get(), 11, static_cast<sqlite3_int64>(record.rid));
    stmt.step_done();
    if (sqlite3_changes(db_) == 0) {
      throw Error(ErrorCode::kUnknownRule, "rule " + std::to_string(record.rid));
    }
  }

  void remove(std::uint64_t rid) override {
    std::lock_guard lock(mutex_);
    Statement stmt(db_, "DELETE FROM rules WHERE rid = ?");
    sqlite3_bind_int64(stmt.get(), 1, static_cast<sqlite3_int64>(rid));
    stmt.step_done();
    if (sqlite3_changes(db_) == 0) {
      throw Error(ErrorCode::kUnknownRule, "rule " + std::to_string(rid));
    }
  }

  std::vector<RuleRecord> list() const override {
    std::lock_guard lock(mutex_);
    Statement stmt(db_, "SELECT " kColumns " FROM rules ORDER BY rid");
    std::vector<RuleRecord> out;
    while (sqlite3_step(stmt.get()) == SQLITE_ROW) out.push_back(read_record(stmt.get()));
    return out;
  }

  std::size_t size() const override {
    std::lock_guard lock(mutex_);
    Statement stmt(db_, "SELECT COUNT(*) FROM rules");
    if (sqlite3_step(stmt.get()) != SQLITE_ROW) return 0;
    return static_cast<std::size_t>(sqlite3_column_int64(stmt.get(), 0));
  }

 private:
  class Statement {
   public:
    Statement(sqlite3* db, const char* sql) {
      if (sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr) != SQLITE_OK) {
        throw Error(ErrorCode::kIo, std::string("sqlite prepare: ") + sqlite3_errmsg(db));
      }
    }
    ~Statement() { sqlite3_finalize(stmt_); }
    sqlite3_stmt* get() { return stmt_; }
    void step_done() {
      int rc = sqlite3_step(stmt_);
      if (rc != SQLITE_DONE) {
        throw Error(ErrorCode::kIo,
                    "sqlite step: " + std::string(sqlite3_errstr(rc)));
      }
    }

   private:
    sqlite3_stmt* stmt_ = nullptr;
  };

  void exec(const char* sql) {
    char* err = nullptr;
    if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
      std::string message = err ? err : "unknown";
      sqlite3_free(err);
      throw Error(ErrorCode::kIo, "sqlite exec: " + message);
    }
  }

  static void bind_record(sqlite3_stmt* stmt, const RuleRecord& record, int base) {
    sqlite3_bind_text(stmt, base + 0, record.name.c_str(), -1, SQLITE_TRANSIENT);
    sqlite3_bind_text(stmt, base + 1, record.datasource_field.c_str(), -1, SQLITE_TRANSIENT);
    sqlite3_bind_text(stmt, base + 2, record.condition_field.c_str(), -1, SQLITE_TRANSIENT);
    sqlite3_bind_text(stmt, base + 3, record.action_field.c_str(), -1, SQLITE_TRANSIENT);
    sqlite3_bind_text(stmt, base + 4, to_string(record.state), -1, SQLITE_STATIC);
    sqlite3_bind_int64(stmt, base + 5, record.period_seconds);
    sqlite3_bind_text(stmt, base + 6, to_string(record.trigger_mode), -1, SQLITE_STATIC);
    sqlite3_bind_int64(stmt, base + 7, record.created_at_ms);
    sqlite3_bind_int64(stmt, base + 8, record.updated_at_ms);
    if (record.fire_at_ms) {
      sqlite3_bind_int64(stmt, base + 9, *record.fire_at_ms);
    } else {
      sqlite3_bind_null(stmt, base + 9);
    }
  }

  static RuleRecord read_record(sqlite3_stmt* stmt) {
    auto text = [&](int col) {
      const unsigned char* s = sqlite3_column_text(stmt, col);
      return s ? std::string(reinterpret_cast<const char*>(s)) : std::string{};
    };
    RuleRecord record;
    record.rid = static_cast<std::uint64_t>(sqlite3_column_int64(stmt, 0));
    record.name = text(1);
    record.datasource_field = text(2);
    record.condition_field = text(3);
    record.action_field = text(4);
    record.state = parse_rule_state(text(5)).value_or(RuleState::kInactive);
    record.period_seconds = static_cast<std::uint32_t>(sqlite3_column_int64(stmt, 6));
    record.trigger_mode = parse_trigger_mode(text(7)).value_or(TriggerMode::kPeriodic);
    record.created_at_ms = sqlite3_column_int64(stmt, 8);
    record.updated_at_ms = sqlite3_column_int64(stmt, 9);
    if (sqlite3_column_type(stmt, 10) != SQLITE_NULL) {
      record.fire_at_ms = sqlite3_column_int64(stmt, 10);
    }
    return record;
  }

  sqlite3* db_ = nullptr;
  mutable std::mutex mutex_;
};

#undef kColumns

}  // namespace

std::unique_ptr<RuleStore> make_memory_rule_store() {
  return std::make_unique<MemoryRuleStore>();
}

std::unique_ptr<RuleStore> make_sqlite_rule_store(const std::string& path) {
  return std::make_unique<SqliteRuleStore>(path);
}

}  // namespace ruleflow
