//! Lists the built-in library models and the contracts of their functions.

use crusted::frontend::Library;
use crusted::libmodels::{builtin_models, model_source};

fn main() {
    let models = builtin_models();
    for (name, f) in &models.functions {
        let ret = &f.signature.ret;
        print!("{:<8} {name}: returns", f.library.header());
        match &ret.optional {
            Some(s) => print!(" optional({s:?})"),
            None => print!(" plain"),
        }
        println!(" {:?}", ret.ownership);
        for p in &f.signature.params {
            let c = &p.contract;
            println!("           {}: {:?} {:?}", p.name, c.ownership, c.init);
        }
    }
    println!("\n<fcntl.h> model source:\n{}", model_source(Library::Fcntl));
}
