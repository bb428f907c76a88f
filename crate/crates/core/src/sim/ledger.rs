/// Token holdings and cumulative flows for every device.
///
/// Tokens only move between devices; the ledger never mints or burns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenLedger {
    holdings: Vec<usize>,
    earned: Vec<u64>,
    spent: Vec<u64>,
    initial: Vec<usize>,
    supply: usize,
}

impl TokenLedger {
    pub fn new(initial: Vec<usize>) -> Self {
        let n = initial.len();
        Self {
            supply: initial.iter().sum(),
            holdings: initial.clone(),
            earned: vec![0; n],
            spent: vec![0; n],
            initial,
        }
    }

    pub fn supply(&self) -> usize {
        self.supply
    }

    pub fn holding(&self, ue: usize) -> usize {
        self.holdings[ue]
    }

    pub fn holdings(&self) -> &[usize] {
        &self.holdings
    }

    pub fn earned(&self, ue: usize) -> u64 {
        self.earned[ue]
    }

    pub fn spent(&self, ue: usize) -> u64 {
        self.spent[ue]
    }

    pub fn initial(&self, ue: usize) -> usize {
        self.initial[ue]
    }

    /// Moves one token from `payer` to `payee`. Returns `false` (and changes
    /// nothing) if the payer holds no tokens.
    pub fn transfer(&mut self, payer: usize, payee: usize) -> bool {
        if self.holdings[payer] == 0 || payer == payee {
            return false;
        }
        self.holdings[payer] -= 1;
        self.spent[payer] += 1;
        self.holdings[payee] += 1;
        self.earned[payee] += 1;
        true
    }

    /// First violated ledger invariant, if any.
    pub fn check(&self) -> Result<(), String> {
        let total: usize = self.holdings.iter().sum();
        if total != self.supply {
            return Err(format!("token supply {} != {}", total, self.supply));
        }
        for ue in 0..self.holdings.len() {
            if self.spent[ue] > self.earned[ue] + self.initial[ue] as u64 {
                return Err(format!(
                    "UE {ue} spent {} > earned {} + initial {}",
                    self.spent[ue], self.earned[ue], self.initial[ue]
                ));
            }
            let expect = self.initial[ue] as u64 + self.earned[ue] - self.spent[ue];
            if self.holdings[ue] as u64 != expect {
                return Err(format!("UE {ue} holding does not match its flows"));
            }
        }
        Ok(())
    }
}
