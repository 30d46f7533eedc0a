#include <sqlite3.h>

#include <stdexcept>

#include "support.hpp"

namespace lincqa::testkit {

namespace {

std::string quote(const std::string& name) {
  std::string out = "\"";
  for (char c : name) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void exec(sqlite3* conn, const std::string& sql) {
  char* err = nullptr;
  if (sqlite3_exec(conn, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err != nullptr ? err : "unknown";
    sqlite3_free(err);
    throw std::runtime_error("sqlite: " + msg + "\n" + sql);
  }
}

struct Connection {
  sqlite3* db = nullptr;
  Connection() {
    if (sqlite3_open(":memory:", &db) != SQLITE_OK) throw std::runtime_error("sqlite: cannot open");
  }
  ~Connection() { sqlite3_close(db); }
};

}  // namespace

AnswerSet run_sql(const std::string& sql, const DatabaseInstance& db, bool boolean) {
  Connection c;
  for (const auto& [name, rel] : db.relations()) {
    const RelationSchema& rs = rel.schema();
    std::string create = "CREATE TABLE " + quote(name) + " (";
    std::string insert = "INSERT INTO " + quote(name) + " VALUES (";
    for (std::size_t i = 0; i < rs.arity(); ++i) {
      create += (i > 0 ? ", " : "") + quote(rs.attributes[i]) + " TEXT";
      insert += i > 0 ? ", ?" : "?";
    }
    exec(c.db, create + ")");
    sqlite3_stmt* stmt = nullptr;
    if (sqlite3_prepare_v2(c.db, (insert + ")").c_str(), -1, &stmt, nullptr) != SQLITE_OK) {
      throw std::runtime_error(std::string("sqlite: ") + sqlite3_errmsg(c.db));
    }
    for (std::size_t r = 0; r < rel.size(); ++r) {
      const ValueId* row = rel.row(r);
      for (std::size_t i = 0; i < rs.arity(); ++i) {
        const std::string& v = db.dictionary().value(row[i]);
        sqlite3_bind_text(stmt, static_cast<int>(i + 1), v.c_str(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
      }
      sqlite3_step(stmt);
      sqlite3_reset(stmt);
    }
    sqlite3_finalize(stmt);
  }

  sqlite3_stmt* stmt = nullptr;
  if (sqlite3_prepare_v2(c.db, sql.c_str(), -1, &stmt, nullptr) != SQLITE_OK) {
    std::string msg = sqlite3_errmsg(c.db);
    throw std::runtime_error("sqlite: " + msg + "\n" + sql);
  }
  AnswerSet out;
  int rc;
  while ((rc = sqlite3_step(stmt)) == SQLITE_ROW) {
    if (boolean) {
      out.insert(std::vector<std::string>{});
      continue;
    }
    std::vector<std::string> t;
    for (int i = 0; i < sqlite3_column_count(stmt); ++i) {
      const unsigned char* text = sqlite3_column_text(stmt, i);
      t.emplace_back(text != nullptr ? reinterpret_cast<const char*>(text) : "");
    }
    out.insert(std::move(t));
  }
  if (rc != SQLITE_DONE) {
    std::string msg = sqlite3_errmsg(c.db);
    sqlite3_finalize(stmt);
    throw std::runtime_error("sqlite: " + msg);
  }
  sqlite3_finalize(stmt);
  return out;
}

}  // namespace lincqa::testkit
