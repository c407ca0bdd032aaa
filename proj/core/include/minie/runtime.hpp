#ifndef MINIE_RUNTIME_HPP
#define MINIE_RUNTIME_HPP

#include <condition_variable>
#include <deque>
#include <functional>
#include <iostream>
#include <mutex>
#include <random>
#include <thread>

#include "minie/model.hpp"
#include "minie/value.hpp"

namespace minie {

enum class AssertLevel { None, Pre, All };

struct RunConfig {
    AssertLevel assertions = AssertLevel::All;
    bool trace = false;
    unsigned long long seed = 0;
    long long max_steps = 1000000;
    std::ostream* out = &std::cout;    // program output (IO)
    std::ostream* err = &std::cerr;    // violation reports, exception chains
    std::ostream* trace_out = nullptr; // defaults to err when trace is on
};

// One routine application's state.
struct Frame {
    Value current;
    const FlatClass* cls = nullptr;   // dynamic class of the current object
    const FeatureEntry* fe = nullptr; // null for invariant evaluation
    std::map<std::string, Value> vars;  // formals + locals
    std::vector<Value> argv;            // formals in declaration order
    Value result;
    long long retry = 0;
    std::vector<std::map<std::string, Value>> scopes;  // object tests, loop exprs

    struct OldSlot {
        bool ok = false;
        Value v;
        std::shared_ptr<ExceptionRecord> marker;
    };
    std::vector<OldSlot> olds;
};

class Machine;
using Builtin = std::function<Value(Machine&, Frame&)>;

// Thrown into blocked processors when the run is torn down; it is not a
// MinieError, so no rescue clause can intercept it.
struct ScoopShutdown {};

class Machine {
public:
    Machine(Universe& u, RunConfig cfg);
    ~Machine();
    Machine(const Machine&) = delete;
    Machine& operator=(const Machine&) = delete;

    // Creates the root object in the root region and applies the entry
    // creation procedure. Returns the process exit code: 0 normal,
    // 2 uncaught failure, 3 deadlock, 5 timeout.
    int run_entry(const std::string& cls, const std::string& proc);

    // Qualified call protocol (dispatch, contracts, scoop routing).
    // `stat` is the static class the name was checked against.
    Value call(const Value& target, const FlatClass& stat, const std::string& name,
               std::vector<Value> args);

    // Creation protocol; spawns a region when `separate_target` is set.
    Value create_object(const TypeRef& type, const std::string& proc,
                        std::vector<Value> args, bool separate_target);

    // --- introspection (tests, builtins) -----------------------------------
    Universe& universe() { return u_; }
    const RunConfig& config() const { return cfg_; }
    Obj& object(ObjId id) { return objects_[id]; }
    const FlatClass* dynamic_class(const Value& v) const;
    std::string out_text(const Value& v);  // the `out` rendering of a value
    long long steps() const { return step_; }
    const std::string& last_exception_type() const { return last_exception_; }
    void set_last_exception_type(std::string t) { last_exception_ = std::move(t); }
    int current_processor() const { return cur_proc_; }
    int region_count() const { return static_cast<int>(procs_.size()); }

    Value default_value(const TypeRef& t) const;
    bool structurally_equal(const Value& a, const Value& b);

    [[noreturn]] void raise(const std::string& type, const std::string& detail,
                            const std::string& where = "");

private:
    friend struct Eval;
    friend void register_builtins(Machine&);
    friend const std::map<std::string, Builtin>& builtin_table();

    Universe& u_;
    RunConfig cfg_;
    std::vector<Obj> objects_;
    std::map<std::string, int> serials_;

    // once memoization; keys are "SEED_CLASS.seed_name" (+"@P<id>" for THREAD)
    std::map<std::string, Value> once_values_;
    std::set<std::string> once_done_;

    std::string last_exception_;
    int assertion_depth_ = 0;
    long long step_ = 0;
    std::mt19937_64 rng_;

    // --- scoop -------------------------------------------------------------
    struct Completion {
        bool finished = false;
        Value result;
        std::shared_ptr<ExceptionRecord> error;
    };
    struct Request {
        int client = 0;
        Value target;
        const FlatClass* stat = nullptr;
        std::string name;
        std::vector<Value> args;
        bool query = false;
        bool from_cond = false;  // submitted while evaluating a wait condition
        std::shared_ptr<Completion> done;
    };
    // Each processor owns a thread, but exactly one thread runs at a time:
    // a single token is handed from processor to processor by the scheduler,
    // so the whole run is as deterministic as the seeded RNG that picks the
    // next token holder.
    struct Processor {
        int id = 0;
        std::deque<Request> queue;
        bool busy = false;       // currently applying a request
        bool dead = false;
        std::shared_ptr<ExceptionRecord> death;
        std::string last_wait;  // last WAIT trace line, to avoid repeats

        std::thread thr;
        std::condition_variable cv;
        bool started = false;
        bool has_token = false;
        bool waiting = false;           // blocked in wait_until
        bool poked = false;             // a request of ours just completed
        bool contended = false;         // someone failed to reserve us
        unsigned long long seen_mut = 0;  // state version at the last recheck
        int cond_depth = 0;             // >0 while evaluating a wait condition
    };
    std::deque<Processor> procs_;  // deque: processors never relocate
    std::map<int, int> holds_;  // reserved processor -> holder processor
    int cur_proc_ = 0;

    std::mutex smu_;                     // guards token handoff only
    unsigned long long mutations_ = 1;   // bumped on real scheduler-visible change
    bool fatal_ = false;                 // tear-down in progress
    int shutdown_turn_ = 0;              // which home thread may unwind now
    ExceptionRecord fatal_rec_;
    bool fatal_set_ = false;

    void trace(const std::string& line);
    void scoop_trace(const std::string& what);
    void bump_step();

    int region_of(const Value& v) const;  // -1 for region-less values
    Value submit(const Value& target, const FlatClass& stat, const std::string& name,
                 std::vector<Value> args, bool query);
    void apply_request(Request req, int supplier);
    bool try_reserve(int holder, const std::set<int>& wanted);
    void release(int holder, const std::set<int>& wanted);
    void wait_until(const std::function<bool()>& cond, int proc, const std::string& why);

    int pick_next(int self);  // -1 when no other processor can run
    void grant(int id, std::unique_lock<std::mutex>& lk);
    void worker(int home);
    void set_fatal(const ExceptionRecord& rec);
    void shutdown_workers();
    bool quiescent() const;
    void mark_mutation() { ++mutations_; }

    // --- application protocol ----------------------------------------------
    Value apply_feature(const Value& target, const FlatClass& dyn, const FeatureEntry& fe,
                        std::vector<Value> args, bool qualified, bool creation = false);
    const FeatureEntry* dispatch(const FlatClass& dyn, const FlatClass& stat,
                                 const std::string& name) const;

    // --- contracts ----------------------------------------------------------
    bool eval_clause_bool(const Clause& c, Frame& f);  // exceptions -> false
    void check_precondition(Frame& f, const std::string& where);
    void check_postcondition(Frame& f, const std::string& where);
    void check_invariant(const Value& target, const FlatClass& dyn, const char* phase);
    void capture_old(Frame& f);
    std::set<int> reservation_set(const Frame& f) const;
    bool separate_preconditions_hold(Frame& f);
    bool has_separate_clauses(const FeatureEntry& fe) const;

    // --- evaluation ----------------------------------------------------------
    Value eval(Expr& e, Frame& f);
    void exec(InstrList& l, Frame& f);
    void exec_instr(Instr& in, Frame& f);
    TypeRef runtime_type(const TypeRef& t, Frame& f);
    Value run_builtin(const std::string& id, Frame& f);
};

// True iff every `external` id in the universe has a registered builtin;
// missing ids are reported as diagnostics (toolchain startup failure).
bool verify_builtin_bindings(const Universe& u, Diagnostics& diags);

}  // namespace minie

#endif
