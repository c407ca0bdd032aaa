#include <algorithm>

#include "minie/runtime.hpp"

// The scheduler. Every processor owns an OS thread, but a single token is
// handed around so exactly one of them executes at a time; the seeded RNG
// picks the next holder, which keeps whole runs replayable. A processor that
// must wait parks its thread and passes the token on; it becomes runnable
// again when the machine state has changed since its last look (or when one
// of its own requests completes).

namespace minie {

namespace {
struct ProcSwitch {
    int& slot;
    int saved;
    ProcSwitch(int& s, int to) : slot(s), saved(s) { slot = to; }
    ~ProcSwitch() { slot = saved; }
};
// which processor this OS thread was created for (0 = the root thread)
thread_local int tl_home = 0;
}  // namespace

Value Machine::submit(const Value& target, const FlatClass& stat, const std::string& name,
                      std::vector<Value> args, bool query) {
    int supplier = region_of(target);
    Processor& p = procs_[supplier];
    if (p.dead && query) {
        // an earlier asynchronous failure surfaces at the next synchronization
        ExceptionRecord rec;
        rec.type = "routine_failure";
        rec.detail = "processor P" + std::to_string(supplier) + " failed earlier";
        rec.where = stat.name + "." + name;
        rec.original = p.death;
        throw MinieError{rec};
    }
    Request req;
    req.client = cur_proc_;
    req.target = target;
    req.stat = &stat;
    req.name = name;
    req.args = std::move(args);
    req.query = query;
    req.from_cond = procs_[cur_proc_].cond_depth > 0;
    req.done = std::make_shared<Completion>();
    scoop_trace("P" + std::to_string(cur_proc_) + " SUBMIT " + stat.name + "." + name +
                " -> P" + std::to_string(supplier));
    std::shared_ptr<Completion> done = req.done;
    bool from_cond = req.from_cond;
    p.queue.push_back(std::move(req));
    if (!from_cond) mark_mutation();
    if (!query) return Value::make_void();
    // wait by necessity; a supplier dying first surfaces here
    wait_until(
        [&] {
            if (procs_[supplier].dead && !done->finished) {
                ExceptionRecord rec;
                rec.type = "routine_failure";
                rec.detail = "processor P" + std::to_string(supplier) +
                             " failed before answering";
                rec.where = stat.name + "." + name;
                rec.original = procs_[supplier].death;
                throw MinieError{rec};
            }
            return done->finished;
        },
        cur_proc_, "S1");
    if (done->error) throw MinieError{*done->error};
    return done->result;
}

void Machine::apply_request(Request req, int supplier) {
    Processor& p = procs_[supplier];
    p.busy = true;
    p.last_wait.clear();
    if (!req.from_cond) mark_mutation();
    scoop_trace("P" + std::to_string(supplier) + " APPLY-START " + req.stat->name + "." +
                req.name);
    {
        ProcSwitch sw(cur_proc_, supplier);
        try {
            const FlatClass* dyn = dynamic_class(req.target);
            const FeatureEntry* fe = dyn ? dispatch(*dyn, *req.stat, req.name) : nullptr;
            if (!fe)
                raise("routine_failure", "lost feature " + req.name + " across regions");
            req.done->result =
                apply_feature(req.target, *dyn, *fe, std::move(req.args), true);
        } catch (MinieError& e) {
            if (e.rec.type == "deadlock" || e.rec.type == "timeout") {
                p.busy = false;
                throw;
            }
            req.done->error = std::make_shared<ExceptionRecord>(e.rec);
            if (!req.query) {
                // nobody is waiting: the processor dies carrying the record
                p.dead = true;
                p.death = req.done->error;
            }
        }
    }
    scoop_trace("P" + std::to_string(supplier) + " APPLY-END " + req.stat->name + "." +
                req.name);
    p.busy = false;
    if (!req.from_cond || p.contended) {
        p.contended = false;
        mark_mutation();
    }
    procs_[req.client].poked = true;  // the client may recheck its wait
    req.done->finished = true;
}

bool Machine::try_reserve(int holder, const std::set<int>& wanted) {
    for (int w : wanted) {
        if (procs_[w].dead) {
            ExceptionRecord rec;
            rec.type = "routine_failure";
            rec.detail = "reservation of dead processor P" + std::to_string(w);
            rec.original = procs_[w].death;
            throw MinieError{rec};
        }
        auto it = holds_.find(w);
        if ((it != holds_.end() && it->second != holder) ||
            (procs_[w].busy && w != holder)) {
            // remember that someone wanted this processor: freeing it later
            // is progress worth waking the waiters for
            procs_[w].contended = true;
            return false;
        }
    }
    for (int w : wanted) holds_[w] = holder;
    return true;
}

void Machine::release(int holder, const std::set<int>& wanted) {
    for (int w : wanted) {
        auto it = holds_.find(w);
        if (it != holds_.end() && it->second == holder) {
            holds_.erase(it);
            if (procs_[w].contended || procs_[holder].cond_depth == 0) {
                procs_[w].contended = false;
                mark_mutation();
            }
        }
    }
}

int Machine::pick_next(int self) {
    std::vector<int> cand;
    for (auto& p : procs_) {
        if (p.id == self || p.dead) continue;
        bool fresh = !p.busy && !p.waiting && !p.queue.empty();
        bool recheck = p.waiting && (p.poked || p.seen_mut != mutations_);
        // the root drain loop applies P0's queue itself when woken
        bool drain = p.id == 0 && p.waiting && !p.busy && !p.queue.empty();
        if (fresh || recheck || drain) cand.push_back(p.id);
    }
    if (cand.empty()) return -1;
    if (cand.size() == 1) return cand.front();
    return cand[std::uniform_int_distribution<size_t>(0, cand.size() - 1)(rng_)];
}

void Machine::grant(int id, std::unique_lock<std::mutex>&) {
    Processor& p = procs_[id];
    // a waiting processor is woken, not given a worker: some thread is
    // already parked on its behalf (e.g. its creator, mid-creation)
    if (id != 0 && !p.started && !p.waiting) {
        p.started = true;
        p.thr = std::thread([this, id] { worker(id); });
    }
    p.has_token = true;
    p.cv.notify_all();
}

void Machine::worker(int home) {
    tl_home = home;
    std::unique_lock<std::mutex> lk(smu_);
    Processor& me = procs_[home];
    for (;;) {
        me.cv.wait(lk, [&] { return me.has_token || (fatal_ && shutdown_turn_ == home); });
        if (fatal_) return;
        if (me.queue.empty() || me.dead) {
            // spurious grant: pass the token along rather than dropping it
            me.has_token = false;
            int nxt = pick_next(home);
            grant(nxt < 0 ? 0 : nxt, lk);
            continue;
        }
        Request req = std::move(me.queue.front());
        me.queue.pop_front();
        lk.unlock();
        cur_proc_ = home;
        bool failed = false;
        ExceptionRecord failure;
        try {
            apply_request(std::move(req), home);
        } catch (MinieError& e) {
            // deadlock or timeout escaping an application ends the whole run
            failed = true;
            failure = e.rec;
        } catch (ScoopShutdown&) {
            return;
        }
        if (failed) {
            set_fatal(failure);
            return;
        }
        lk.lock();
        me.has_token = false;
        int nxt = pick_next(home);
        grant(nxt < 0 ? 0 : nxt, lk);
    }
}

void Machine::wait_until(const std::function<bool()>& cond, int proc,
                         const std::string& why) {
    Processor& me = procs_[proc];
    for (;;) {
        ++me.cond_depth;
        bool ok;
        try {
            ok = cond();
        } catch (...) {
            --me.cond_depth;
            throw;
        }
        --me.cond_depth;
        if (ok) {
            me.last_wait.clear();
            return;
        }
        if (!why.empty()) {
            std::string line = "P" + std::to_string(proc) + " WAIT(" + why + ")";
            if (me.last_wait != line) {
                scoop_trace(line);
                me.last_wait = line;
            } else {
                bump_step();
            }
        } else {
            bump_step();
        }
        std::unique_lock<std::mutex> lk(smu_);
        me.waiting = true;
        me.poked = false;
        me.seen_mut = mutations_;
        int nxt = pick_next(proc);
        if (nxt < 0) {
            // every other processor is parked with nothing new to look at:
            // this wait can never be satisfied
            me.waiting = false;
            lk.unlock();
            scoop_trace("P" + std::to_string(proc) + " DEADLOCK");
            raise("deadlock", "P" + std::to_string(proc) + " waiting on " +
                                  (why.empty() ? std::string("quiescence") : why) +
                                  " with no runnable processor");
        }
        me.has_token = false;
        grant(nxt, lk);
        me.cv.wait(lk, [&] { return me.has_token || (fatal_ && shutdown_turn_ == tl_home); });
        me.waiting = false;
        if (fatal_) {
            lk.unlock();
            throw ScoopShutdown{};
        }
        lk.unlock();
        cur_proc_ = proc;
    }
}

void Machine::set_fatal(const ExceptionRecord& rec) {
    std::lock_guard<std::mutex> lk(smu_);
    if (!fatal_set_) {
        fatal_rec_ = rec;
        fatal_set_ = true;
    }
    fatal_ = true;
    shutdown_turn_ = 0;  // wake the root thread first; workers unwind later
    for (auto& p : procs_) p.cv.notify_all();
}

bool Machine::quiescent() const {
    for (const auto& p : procs_) {
        if (p.id == 0 || p.dead) continue;
        if (p.busy || p.waiting || !p.queue.empty()) return false;
    }
    return true;
}

void Machine::shutdown_workers() {
    {
        std::lock_guard<std::mutex> lk(smu_);
        fatal_ = true;
        if (!fatal_set_) {
            fatal_rec_.type = "shutdown";
            fatal_set_ = true;
        }
    }
    // unwind one thread at a time so no two ever touch machine state together
    for (auto& p : procs_) {
        if (!p.started) continue;
        {
            std::lock_guard<std::mutex> lk(smu_);
            shutdown_turn_ = p.id;
            for (auto& q : procs_) q.cv.notify_all();
        }
        if (p.thr.joinable()) p.thr.join();
        p.started = false;
    }
}

Machine::~Machine() { shutdown_workers(); }

}  // namespace minie
