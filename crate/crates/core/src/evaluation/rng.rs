use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Independent random streams inside one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Process = 0,
    Detection = 1,
    Range = 2,
    Bearing = 3,
    Policy = 4,
    Map = 5,
}

/// 256-bit key for `(master seed, trial)`.
pub fn trial_key(master: u64, trial: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"activeslam-trial");
    h.update(master.to_le_bytes());
    h.update(trial.to_le_bytes());
    h.finalize().into()
}

/// Short printable seed identifying a trial's streams.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    u64::from_le_bytes(trial_key(master, trial)[..8].try_into().expect("8 bytes"))
}

/// The stream for `purpose` in trial `trial`. Streams of different purposes
/// never overlap, so policies that consume different numbers of policy draws
/// still see identical noise.
pub fn stream(master: u64, trial: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(trial_key(master, trial));
    rng.set_stream(purpose as u64);
    rng
}
