//! Process groups and collective operations on a simulated world.
//!
//! [`run_simulated`] executes one closure per virtual rank, each on its own
//! thread. Ranks interact only through collectives on a [`Group`]; every
//! collective is a rendezvous of all group members, matched by a per-group
//! sequence number. Calling different collectives at the same sequence
//! position is reported as [`Error::CollectiveMismatch`]. When every live
//! rank is blocked in a collective that cannot complete (for example because
//! a member skipped it and returned), the world fails with
//! [`Error::Deadlock`] instead of hanging.
//!
//! Once any collective fails the whole world is poisoned: every pending and
//! future collective returns the same error.

use std::any::Any;
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread;
use std::time::{Duration, Instant};

use crate::dense::{DenseArray, Element};
use crate::error::{Error, Result};
use crate::subarray::SubarrayLayout;

type Payload = Box<dyn Any + Send + Sync>;

#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Upper bound on how long a rank may wait inside one collective.
    pub timeout: Duration,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            timeout: Duration::from_secs(60),
        }
    }
}

struct Round {
    op: &'static str,
    contributions: Vec<Option<Payload>>,
    arrived: usize,
    result: Option<Arc<Vec<Payload>>>,
    taken: usize,
}

struct GroupState {
    /// World ranks of the members, in group-rank order.
    members: Vec<usize>,
    next_seq: Vec<u64>,
    rounds: BTreeMap<u64, Round>,
}

struct State {
    groups: Vec<GroupState>,
    split_ids: HashMap<(usize, u64, usize), usize>,
    blocked: usize,
    finished: usize,
    failure: Option<Error>,
}

struct Engine {
    state: Mutex<State>,
    cv: Condvar,
    world_size: usize,
    timeout: Duration,
}

impl Engine {
    fn lock(&self) -> MutexGuard<'_, State> {
        // A panicking rank never holds the lock across user code, so a
        // poisoned mutex still guards consistent state.
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn fail(&self, st: &mut State, err: Error) -> Error {
        if st.failure.is_none() {
            st.failure = Some(err);
        }
        self.cv.notify_all();
        st.failure.clone().unwrap()
    }

    /// Fails the world if no rank can make progress any more.
    fn check_deadlock(&self, st: &mut State) -> Option<Error> {
        if st.blocked == 0 || st.finished + st.blocked < self.world_size {
            return None;
        }
        let mut pending = Vec::new();
        for (id, g) in st.groups.iter().enumerate() {
            for (seq, round) in &g.rounds {
                if round.result.is_some() {
                    continue;
                }
                let missing: Vec<usize> = g
                    .members
                    .iter()
                    .enumerate()
                    .filter(|(r, _)| round.contributions[*r].is_none())
                    .map(|(_, &w)| w)
                    .collect();
                pending.push(format!(
                    "group {id} {} #{seq} waiting for world ranks {missing:?}",
                    round.op
                ));
            }
        }
        Some(self.fail(st, Error::Deadlock(pending.join("; "))))
    }

    fn rank_finished(&self) {
        let mut st = self.lock();
        st.finished += 1;
        self.check_deadlock(&mut st);
        self.cv.notify_all();
    }
}

/// One rank's handle on a process group.
///
/// Handles are not shared between ranks; every member holds its own.
pub struct Group {
    engine: Arc<Engine>,
    id: usize,
    rank: usize,
    size: usize,
    world_rank: usize,
}

impl std::fmt::Debug for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Group")
            .field("id", &self.id)
            .field("rank", &self.rank)
            .field("size", &self.size)
            .field("world_rank", &self.world_rank)
            .finish()
    }
}

struct AlltoallwPayload<T> {
    parts: Vec<Vec<T>>,
}

struct ContiguousPayload<T> {
    data: Vec<T>,
    counts: Vec<usize>,
    displs: Vec<usize>,
}

impl Group {
    pub fn size(&self) -> usize {
        self.size
    }

    /// Position of this rank inside the group.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn world_rank(&self) -> usize {
        self.world_rank
    }

    /// Poisons the world with `err` and returns it.
    fn poison(&self, err: Error) -> Error {
        let mut st = self.engine.lock();
        self.engine.fail(&mut st, err)
    }

    /// Enters collective `op` with this rank's contribution and returns every
    /// member's contribution, indexed by group rank, plus the round's
    /// sequence number.
    fn collective(&self, op: &'static str, payload: Payload) -> Result<(u64, Arc<Vec<Payload>>)> {
        let engine = &*self.engine;
        let mut st = engine.lock();
        if let Some(err) = &st.failure {
            return Err(err.clone());
        }
        let size = self.size;
        let group = &mut st.groups[self.id];
        let seq = group.next_seq[self.rank];
        group.next_seq[self.rank] += 1;
        let round = group.rounds.entry(seq).or_insert_with(|| Round {
            op,
            contributions: (0..size).map(|_| None).collect(),
            arrived: 0,
            result: None,
            taken: 0,
        });
        if round.op != op {
            let err = Error::CollectiveMismatch {
                group: self.id,
                rank: self.world_rank,
                called: op,
                pending: round.op,
            };
            return Err(engine.fail(&mut st, err));
        }
        round.contributions[self.rank] = Some(payload);
        round.arrived += 1;
        if round.arrived == size {
            let all: Vec<Payload> = round
                .contributions
                .iter_mut()
                .map(|c| c.take().expect("every member arrived"))
                .collect();
            let result = Arc::new(all);
            round.result = Some(Arc::clone(&result));
            round.taken = 1;
            if size == 1 {
                group.rounds.remove(&seq);
            }
            st.blocked -= size - 1;
            engine.cv.notify_all();
            return Ok((seq, result));
        }

        st.blocked += 1;
        if let Some(err) = engine.check_deadlock(&mut st) {
            return Err(err);
        }
        let deadline = Instant::now() + engine.timeout;
        loop {
            let now = Instant::now();
            if now >= deadline {
                return Err(engine.fail(&mut st, Error::Timeout(engine.timeout)));
            }
            st = engine
                .cv
                .wait_timeout(st, deadline - now)
                .unwrap_or_else(|e| e.into_inner())
                .0;
            if let Some(err) = &st.failure {
                return Err(err.clone());
            }
            let group = &mut st.groups[self.id];
            let round = group.rounds.get_mut(&seq).expect("round outlives its members");
            if let Some(result) = &round.result {
                let result = Arc::clone(result);
                round.taken += 1;
                if round.taken == size {
                    group.rounds.remove(&seq);
                }
                return Ok((seq, result));
            }
        }
    }

    pub fn barrier(&self) -> Result<()> {
        self.collective("barrier", Box::new(())).map(|_| ())
    }

    /// Gathers one value from every member, in group-rank order.
    pub fn allgather<T: Clone + Send + Sync + 'static>(&self, value: T) -> Result<Vec<T>> {
        let (_, all) = self.collective("allgather", Box::new(value))?;
        all.iter()
            .map(|p| {
                p.downcast_ref::<T>()
                    .cloned()
                    .ok_or_else(|| self.poison(Error::InvalidArgument("allgather type mismatch".into())))
            })
            .collect()
    }

    /// Splits the group into one child group per distinct `color`. Members of
    /// a child keep their relative order from this group.
    pub fn split(&self, color: usize) -> Result<Group> {
        let (seq, all) = self.collective("split", Box::new(color))?;
        let colors: Vec<usize> = all
            .iter()
            .map(|p| *p.downcast_ref::<usize>().expect("split payload is a color"))
            .collect();
        let mut st = self.engine.lock();
        let parent_members = st.groups[self.id].members.clone();
        let members: Vec<usize> = colors
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == color)
            .map(|(r, _)| parent_members[r])
            .collect();
        let rank = colors[..self.rank].iter().filter(|&&c| c == color).count();
        let key = (self.id, seq, color);
        let id = match st.split_ids.get(&key) {
            Some(&id) => id,
            None => {
                let id = st.groups.len();
                st.groups.push(GroupState {
                    next_seq: vec![0; members.len()],
                    members: members.clone(),
                    rounds: BTreeMap::new(),
                });
                st.split_ids.insert(key, id);
                id
            }
        };
        Ok(Group {
            engine: Arc::clone(&self.engine),
            id,
            rank,
            size: members.len(),
            world_rank: self.world_rank,
        })
    }

    /// Generalized all-to-all: region `send_layouts[q]` of `send` goes to
    /// member `q`, and the region received from member `p` lands in
    /// `recv_layouts[p]` of `recv`.
    pub fn alltoallw<T: Element>(
        &self,
        send: &DenseArray<T>,
        send_layouts: &[SubarrayLayout],
        recv: &mut DenseArray<T>,
        recv_layouts: &[SubarrayLayout],
    ) -> Result<()> {
        if let Err(err) = self.check_alltoallw(send, send_layouts, recv, recv_layouts) {
            return Err(self.poison(err));
        }
        let parts = send_layouts
            .iter()
            .map(|l| send.region_read(l))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| self.poison(e))?;
        let (_, all) = self.collective("alltoallw", Box::new(AlltoallwPayload { parts }))?;
        for (p, payload) in all.iter().enumerate() {
            let payload = payload
                .downcast_ref::<AlltoallwPayload<T>>()
                .ok_or_else(|| {
                    self.poison(Error::KindMismatch {
                        expected: T::KIND.name(),
                        actual: "a different element kind",
                    })
                })?;
            let part = &payload.parts[self.rank];
            let expected = recv_layouts[p].element_count();
            if part.len() != expected {
                return Err(self.poison(Error::CountMismatch {
                    from: p,
                    to: self.rank,
                    sent: part.len(),
                    expected,
                }));
            }
            recv.region_write(&recv_layouts[p], part).map_err(|e| self.poison(e))?;
        }
        Ok(())
    }

    fn check_alltoallw<T: Element>(
        &self,
        send: &DenseArray<T>,
        send_layouts: &[SubarrayLayout],
        recv: &DenseArray<T>,
        recv_layouts: &[SubarrayLayout],
    ) -> Result<()> {
        for layouts in [send_layouts, recv_layouts] {
            if layouts.len() != self.size {
                return Err(Error::InvalidArgument(format!(
                    "expected {} layouts, got {}",
                    self.size,
                    layouts.len()
                )));
            }
        }
        for (layouts, array) in [(send_layouts, send), (recv_layouts, recv)] {
            for l in layouts {
                l.validate()?;
                if l.sizes() != array.shape() {
                    return Err(Error::ShapeMismatch {
                        expected: array.shape().to_vec(),
                        actual: l.sizes().to_vec(),
                    });
                }
                if l.kind() != T::KIND {
                    return Err(Error::KindMismatch {
                        expected: T::KIND.name(),
                        actual: l.kind().name(),
                    });
                }
            }
        }
        for i in 0..recv_layouts.len() {
            for j in i + 1..recv_layouts.len() {
                if recv_layouts[i].overlaps(&recv_layouts[j]) {
                    return Err(Error::OverlappingRegions { first: i, second: j });
                }
            }
        }
        Ok(())
    }

    /// All-to-all of equal contiguous chunks: chunk `q` of this rank's `send`
    /// lands as chunk `p` (this rank) of member `q`'s `recv`.
    pub fn alltoall<T: Element>(&self, send: &[T], recv: &mut [T]) -> Result<()> {
        let m = self.size;
        if send.len() % m != 0 || recv.len() % m != 0 {
            return Err(self.poison(Error::InvalidArgument(format!(
                "alltoall buffers ({} send, {} recv) not divisible into {m} chunks",
                send.len(),
                recv.len()
            ))));
        }
        let (sc, rc) = (send.len() / m, recv.len() / m);
        let send_displs: Vec<usize> = (0..m).map(|q| q * sc).collect();
        let recv_displs: Vec<usize> = (0..m).map(|p| p * rc).collect();
        self.exchange_contiguous("alltoall", send, &vec![sc; m], &send_displs, recv, &vec![rc; m], &recv_displs)
    }

    /// All-to-all with per-peer counts and displacements (in elements).
    #[allow(clippy::too_many_arguments)]
    pub fn alltoallv<T: Element>(
        &self,
        send: &[T],
        send_counts: &[usize],
        send_displs: &[usize],
        recv: &mut [T],
        recv_counts: &[usize],
        recv_displs: &[usize],
    ) -> Result<()> {
        self.exchange_contiguous("alltoallv", send, send_counts, send_displs, recv, recv_counts, recv_displs)
    }

    #[allow(clippy::too_many_arguments)]
    fn exchange_contiguous<T: Element>(
        &self,
        op: &'static str,
        send: &[T],
        send_counts: &[usize],
        send_displs: &[usize],
        recv: &mut [T],
        recv_counts: &[usize],
        recv_displs: &[usize],
    ) -> Result<()> {
        let m = self.size;
        let bad = [send_counts.len(), send_displs.len(), recv_counts.len(), recv_displs.len()]
            .iter()
            .any(|&n| n != m);
        if bad {
            return Err(self.poison(Error::InvalidArgument(format!(
                "{op} needs {m} counts and displacements per side"
            ))));
        }
        for (buf_len, counts, displs) in [
            (send.len(), send_counts, send_displs),
            (recv.len(), recv_counts, recv_displs),
        ] {
            if counts.iter().zip(displs).any(|(&c, &d)| d + c > buf_len) {
                return Err(self.poison(Error::InvalidArgument(format!(
                    "{op} chunk exceeds buffer of {buf_len} elements"
                ))));
            }
        }
        let payload = ContiguousPayload {
            data: send.to_vec(),
            counts: send_counts.to_vec(),
            displs: send_displs.to_vec(),
        };
        let (_, all) = self.collective(op, Box::new(payload))?;
        for (p, payload) in all.iter().enumerate() {
            let payload = payload.downcast_ref::<ContiguousPayload<T>>().ok_or_else(|| {
                self.poison(Error::KindMismatch {
                    expected: T::KIND.name(),
                    actual: "a different element kind",
                })
            })?;
            let (count, displ) = (payload.counts[self.rank], payload.displs[self.rank]);
            if count != recv_counts[p] {
                return Err(self.poison(Error::CountMismatch {
                    from: p,
                    to: self.rank,
                    sent: count,
                    expected: recv_counts[p],
                }));
            }
            recv[recv_displs[p]..recv_displs[p] + count]
                .copy_from_slice(&payload.data[displ..displ + count]);
        }
        Ok(())
    }
}

struct FinishGuard<'a>(&'a Engine);

impl Drop for FinishGuard<'_> {
    fn drop(&mut self) {
        self.0.rank_finished();
    }
}

fn panic_message(payload: &(dyn Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".to_string()
    }
}

/// Runs `body` once per virtual rank of a world of `world_size` ranks and
/// returns the per-rank results in rank order.
pub fn run_simulated<R, F>(world_size: usize, body: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(Group) -> R + Sync,
{
    run_simulated_with(&SimConfig::default(), world_size, body)
}

pub fn run_simulated_with<R, F>(config: &SimConfig, world_size: usize, body: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(Group) -> R + Sync,
{
    if world_size == 0 {
        return Err(Error::InvalidArgument("world needs at least one rank".into()));
    }
    let engine = Arc::new(Engine {
        state: Mutex::new(State {
            groups: vec![GroupState {
                members: (0..world_size).collect(),
                next_seq: vec![0; world_size],
                rounds: BTreeMap::new(),
            }],
            split_ids: HashMap::new(),
            blocked: 0,
            finished: 0,
            failure: None,
        }),
        cv: Condvar::new(),
        world_size,
        timeout: config.timeout,
    });

    let outcomes: Vec<thread::Result<R>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..world_size)
            .map(|rank| {
                let engine = Arc::clone(&engine);
                let body = &body;
                thread::Builder::new()
                    .name(format!("rank-{rank}"))
                    .spawn_scoped(scope, move || {
                        let _guard = FinishGuard(&engine);
                        let group = Group {
                            engine: Arc::clone(&engine),
                            id: 0,
                            rank,
                            size: world_size,
                            world_rank: rank,
                        };
                        body(group)
                    })
                    .expect("spawn rank thread")
            })
            .collect();
        handles.into_iter().map(|h| h.join()).collect()
    });

    let mut results = Vec::with_capacity(world_size);
    for (rank, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(r) => results.push(r),
            Err(payload) => {
                return Err(Error::RankPanicked {
                    rank,
                    message: panic_message(payload.as_ref()),
                })
            }
        }
    }
    if let Some(err) = engine.lock().failure.clone() {
        return Err(err);
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::ElemKind;

    #[test]
    fn rank_ids() {
        assert_eq!(run_simulated(1, |g| g.rank()).unwrap(), vec![0]);
        assert_eq!(run_simulated(4, |g| g.rank()).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn barrier_then_size() {
        let out = run_simulated(3, |g| {
            g.barrier().unwrap();
            g.size()
        })
        .unwrap();
        assert_eq!(out, vec![3, 3, 3]);
    }

    #[test]
    fn zero_ranks_rejected() {
        assert!(run_simulated(0, |g| g.rank()).is_err());
    }

    #[test]
    fn alltoall_two_ranks() {
        let out = run_simulated(2, |g| {
            let p = g.rank() as f64;
            let send = [p, p + 10.0];
            let mut recv = [0.0; 2];
            g.alltoall(&send, &mut recv).unwrap();
            recv
        })
        .unwrap();
        // chunk q of p's send lands as chunk p of q's recv
        assert_eq!(out, vec![[0.0, 1.0], [10.0, 11.0]]);
    }

    #[test]
    fn alltoallw_rows_to_columns() {
        let out = run_simulated(2, |g| {
            let p = g.rank();
            let send = DenseArray::from_vec(&[1, 2], vec![2.0 * p as f64, 2.0 * p as f64 + 1.0]).unwrap();
            let mut recv = DenseArray::<f64>::zeros(&[2, 1]);
            let sl = crate::subarray::subarray_sequence(ElemKind::Real64, &[1, 2], 1, 2).unwrap();
            let rl = crate::subarray::subarray_sequence(ElemKind::Real64, &[2, 1], 0, 2).unwrap();
            g.alltoallw(&send, &sl, &mut recv, &rl).unwrap();
            recv.into_vec()
        })
        .unwrap();
        assert_eq!(out, vec![vec![0.0, 2.0], vec![1.0, 3.0]]);
    }

    #[test]
    fn split_into_rows() {
        let out = run_simulated(6, |g| {
            let sub = g.split(g.rank() / 3).unwrap();
            let members = sub.allgather(g.rank()).unwrap();
            (sub.rank(), sub.size(), members)
        })
        .unwrap();
        assert_eq!(out[4], (1, 3, vec![3, 4, 5]));
        assert_eq!(out[0], (0, 3, vec![0, 1, 2]));
    }

    #[test]
    fn skipped_collective_is_deadlock() {
        let err = run_simulated(3, |g| {
            if g.rank() != 1 {
                g.barrier()
            } else {
                Ok(())
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::Deadlock(_)), "{err:?}");
    }

    #[test]
    fn mismatched_collectives() {
        let err = run_simulated(2, |g| {
            if g.rank() == 0 {
                g.barrier()
            } else {
                g.allgather(1usize).map(|_| ())
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::CollectiveMismatch { .. }), "{err:?}");
    }

    #[test]
    fn count_mismatch_reported() {
        let err = run_simulated(2, |g| {
            let send = vec![1.0; 2 + g.rank()];
            let mut recv = vec![0.0; 4];
            let sc = vec![1 + g.rank(), 1];
            g.alltoallv(&send, &sc, &[0, sc[0]], &mut recv, &[1, 1], &[0, 1])
        })
        .unwrap_err();
        assert!(matches!(err, Error::CountMismatch { .. }), "{err:?}");
    }

    #[test]
    fn panicking_rank_does_not_hang() {
        let err = run_simulated(2, |g| {
            if g.rank() == 0 {
                panic!("boom");
            }
            g.barrier()
        })
        .unwrap_err();
        assert_eq!(
            err,
            Error::RankPanicked {
                rank: 0,
                message: "boom".into()
            }
        );
    }
}
