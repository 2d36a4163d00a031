// Sampling from a model served over TCP with the JSON-lines protocol. The
// server here runs in-process; any process speaking the protocol works.

use std::io::BufReader;
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use arsample::lm::LanguageModel;
use arsample::remote::{serve, BackendSession, RemoteModel, Transport};
use arsample::sampler::{sample_batch, DecodeOptions, Strategy};
use arsample::toy::stationary;
use arsample::Result;

pub fn run_example() -> Result<()> {
    let local = stationary(&["x", "y", "z", "</s>"], vec![0.4, 0.3, 0.2, 0.1])?;
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let address = listener.local_addr()?.to_string();
    let served = local.clone();
    let server = thread::spawn(move || -> Result<()> {
        let (stream, _) = listener.accept()?;
        stream.set_nodelay(true)?;
        serve(&served, BufReader::new(stream.try_clone()?), stream)
    });

    let session = BackendSession::open(&Transport::Tcp { address }, Duration::from_secs(5))?;
    let remote = RemoteModel::from_sessions(vec![session])?;
    println!("remote vocabulary: {:?}", remote.vocab().tokens());

    let opts = DecodeOptions::new(4);
    let over_wire = sample_batch(&remote, &opts, Strategy::Arithmetic, 6, 3, 1)?;
    let in_process = sample_batch(&local, &opts, Strategy::Arithmetic, 6, 3, 1)?;
    for (r, l) in over_wire.iter().zip(&in_process) {
        println!("{:<12} {:<12}", remote.vocab().detokenize(&r.tokens), local.vocab().detokenize(&l.tokens));
    }
    drop(remote);
    server.join().expect("server thread")?;
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
