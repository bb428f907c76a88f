/// Per-cell downlink/idle partition for one slot. Uplink is not modelled.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Schedule {
    /// Scheduled downlink UEs per cell, ascending id.
    pub downlink: Vec<Vec<usize>>,
    /// Idle UEs per cell, ascending id.
    pub idle: Vec<Vec<usize>>,
}

/// Round-robin downlink scheduler with a fixed number of grants per cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundRobin {
    grants_per_cell: usize,
    offsets: Vec<usize>,
}

impl RoundRobin {
    pub fn new(cells: usize, grants_per_cell: usize) -> Self {
        Self {
            grants_per_cell,
            offsets: vec![0; cells],
        }
    }

    /// `members[c]` lists the UEs associated with cell `c` in ascending id
    /// order. Cells with more members than grants serve a rotating window that
    /// advances by the grant count each slot.
    pub fn schedule(&mut self, members: &[Vec<usize>]) -> Schedule {
        let mut out = Schedule {
            downlink: Vec::with_capacity(members.len()),
            idle: Vec::with_capacity(members.len()),
        };
        for (cell, ues) in members.iter().enumerate() {
            let n = ues.len();
            if n <= self.grants_per_cell {
                out.downlink.push(ues.clone());
                out.idle.push(Vec::new());
                continue;
            }
            let start = self.offsets[cell] % n;
            let mut picked = vec![false; n];
            for i in 0..self.grants_per_cell {
                picked[(start + i) % n] = true;
            }
            self.offsets[cell] = (start + self.grants_per_cell) % n;
            let (dl, idle): (Vec<_>, Vec<_>) = ues.iter().zip(&picked).partition(|(_, p)| **p);
            out.downlink.push(dl.into_iter().map(|(u, _)| *u).collect());
            out.idle.push(idle.into_iter().map(|(u, _)| *u).collect());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cell_fully_scheduled() {
        let mut rr = RoundRobin::new(1, 5);
        let s = rr.schedule(&[vec![1, 4, 9]]);
        assert_eq!(s.downlink[0], vec![1, 4, 9]);
        assert!(s.idle[0].is_empty());
    }

    #[test]
    fn rotation_advances_by_grant_count() {
        let mut rr = RoundRobin::new(1, 5);
        let ues: Vec<usize> = (0..12).collect();
        let s = rr.schedule(std::slice::from_ref(&ues));
        assert_eq!(s.downlink[0], vec![0, 1, 2, 3, 4]);
        assert_eq!(s.idle[0].len(), 7);
        let s = rr.schedule(std::slice::from_ref(&ues));
        assert_eq!(s.downlink[0], vec![5, 6, 7, 8, 9]);
        let s = rr.schedule(&[ues]);
        assert_eq!(s.downlink[0], vec![0, 1, 2, 10, 11]);
    }

    #[test]
    fn every_ue_in_exactly_one_set() {
        let mut rr = RoundRobin::new(3, 5);
        let members = vec![(0..8).collect::<Vec<_>>(), vec![8, 9], (10..30).collect()];
        for _ in 0..7 {
            let s = rr.schedule(&members);
            for (c, ues) in members.iter().enumerate() {
                let mut all: Vec<usize> =
                    s.downlink[c].iter().chain(&s.idle[c]).copied().collect();
                all.sort_unstable();
                assert_eq!(&all, ues);
                assert!(s.downlink[c].len() <= 5);
            }
        }
    }
}
