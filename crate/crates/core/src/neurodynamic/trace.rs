//! Optional CSV dump of flow trajectories.

use std::fmt::Write as _;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

/// Shared sink; each flow buffers its rows and writes them as one block.
///
/// A block starts with `# flow <id> <kind> dim=<d>` followed by the header
/// `t,x1..xd,r,S,speed`.
#[derive(Clone)]
pub struct FlowTrace {
    inner: Arc<Inner>,
}

struct Inner {
    out: Mutex<Box<dyn Write + Send>>,
    next: AtomicUsize,
}

impl std::fmt::Debug for FlowTrace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FlowTrace").finish_non_exhaustive()
    }
}

pub(crate) struct Block {
    text: String,
}

impl FlowTrace {
    pub fn new(out: Box<dyn Write + Send>) -> Self {
        FlowTrace { inner: Arc::new(Inner { out: Mutex::new(out), next: AtomicUsize::new(1) }) }
    }

    pub(crate) fn block(&self, kind: &str, dim: usize) -> Block {
        let id = self.inner.next.fetch_add(1, Ordering::Relaxed);
        let mut text = format!("# flow {id} {kind} dim={dim}\nt");
        for i in 1..=dim {
            let _ = write!(text, ",x{i}");
        }
        text.push_str(",r,S,speed\n");
        Block { text }
    }

    pub(crate) fn commit(&self, block: Block) {
        if let Ok(mut out) = self.inner.out.lock() {
            let _ = out.write_all(block.text.as_bytes());
            let _ = out.flush();
        }
    }
}

impl Block {
    pub(crate) fn row(&mut self, t: f64, x: &[f64], r: f64, s: f64, speed: f64) {
        let _ = write!(self.text, "{t:e}");
        for v in x {
            let _ = write!(self.text, ",{v:e}");
        }
        let _ = writeln!(self.text, ",{r:e},{s:e},{speed:e}");
    }
}
