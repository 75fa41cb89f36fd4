//! Every example must run to completion.

mod pnm_and_psnr {
    #![allow(dead_code)]
    include!("../examples/pnm_and_psnr.rs");

    #[test]
    fn runs() {
        main();
    }
}

mod rap_mosaic {
    #![allow(dead_code)]
    include!("../examples/rap_mosaic.rs");

    #[test]
    fn runs() {
        main();
    }
}

mod lossless_coding {
    #![allow(dead_code)]
    include!("../examples/lossless_coding.rs");

    #[test]
    fn runs() {
        main();
    }
}

mod metric_gradients {
    #![allow(dead_code)]
    include!("../examples/metric_gradients.rs");

    #[test]
    fn runs() {
        main();
    }
}

mod budget_encode {
    #![allow(dead_code)]
    include!("../examples/budget_encode.rs");

    #[test]
    fn runs() {
        main();
    }
}

mod container_inspect {
    #![allow(dead_code)]
    include!("../examples/container_inspect.rs");

    #[test]
    fn runs() {
        main();
    }
}

mod bd_rate {
    #![allow(dead_code)]
    include!("../examples/bd_rate.rs");

    #[test]
    fn runs() {
        main();
    }
}

mod corpus_suite {
    #![allow(dead_code)]
    include!("../examples/corpus_suite.rs");

    #[test]
    fn runs() {
        main();
    }
}
